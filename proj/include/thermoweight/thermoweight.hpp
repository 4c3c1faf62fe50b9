#ifndef THERMOWEIGHT_THERMOWEIGHT_HPP
#define THERMOWEIGHT_THERMOWEIGHT_HPP

#include "thermoweight/chain.hpp"
#include "thermoweight/equilibrium.hpp"
#include "thermoweight/errors.hpp"
#include "thermoweight/log_value.hpp"
#include "thermoweight/oracle.hpp"
#include "thermoweight/potential.hpp"
#include "thermoweight/pressure.hpp"
#include "thermoweight/sft.hpp"
#include "thermoweight/sponge.hpp"

#endif
