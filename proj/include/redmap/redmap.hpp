#ifndef REDMAP_REDMAP_HPP
#define REDMAP_REDMAP_HPP

#include "redmap/betafn.hpp"
#include "redmap/equilibrium.hpp"
#include "redmap/errors.hpp"
#include "redmap/io.hpp"
#include "redmap/model.hpp"
#include "redmap/presets.hpp"
#include "redmap/stability.hpp"
#include "redmap/sweep.hpp"

#endif  // REDMAP_REDMAP_HPP
