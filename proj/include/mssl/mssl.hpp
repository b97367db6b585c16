#ifndef MSSL_MSSL_HPP_
#define MSSL_MSSL_HPP_

#include "mssl/ecm.hpp"
#include "mssl/harness.hpp"
#include "mssl/metrics.hpp"
#include "mssl/model.hpp"
#include "mssl/prior.hpp"
#include "mssl/rng.hpp"
#include "mssl/scalar_update.hpp"

#endif  // MSSL_MSSL_HPP_
