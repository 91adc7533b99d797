#pragma once

#include "hyperchol/errors.hpp"
#include "hyperchol/harness.hpp"
#include "hyperchol/io.hpp"
#include "hyperchol/kernel.hpp"
#include "hyperchol/matrix.hpp"
#include "hyperchol/panel.hpp"
#include "hyperchol/thread_pool.hpp"
