#pragma once
// Umbrella header.

#include "varicart/cartan.hpp"
#include "varicart/jetcalc.hpp"
#include "varicart/modelio.hpp"
#include "varicart/numverify.hpp"
#include "varicart/porthamil.hpp"
