#ifndef DOA_RMT_DOA_RMT_HPP
#define DOA_RMT_DOA_RMT_HPP

#include "doa_rmt/angles.hpp"
#include "doa_rmt/cmatrix.hpp"
#include "doa_rmt/config.hpp"
#include "doa_rmt/errors.hpp"
#include "doa_rmt/estimators.hpp"
#include "doa_rmt/harness.hpp"
#include "doa_rmt/matkern.hpp"
#include "doa_rmt/rmttheory.hpp"
#include "doa_rmt/rng.hpp"
#include "doa_rmt/sigmodel.hpp"
#include "doa_rmt/subspace.hpp"

#endif  // DOA_RMT_DOA_RMT_HPP
