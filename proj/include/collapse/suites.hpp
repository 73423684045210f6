// Self-contained property suites behind the `lemma` and `grad-check` CLI
// subcommands. Each suite runs a fixed, seeded batch of randomized checks and
// reports its worst-case residuals; the acceptance tests reuse them.
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "collapse/ufm.hpp"

namespace collapse::suites {

struct SuiteResult {
  bool pass = false;
  nlohmann::ordered_json details;  // worst-case residuals, counts
};

// dpr1_eigenvalues vs dense Jacobi eigensolver on 500 random instances
// (n <= 20, forced zero weights and repeated diagonals), plus interlacing.
SuiteResult dpr1_suite();

// z_structure_classify vs a brute-force two-level test on 1e4 vectors,
// K in 3..10, including the closed-form sigma_max of both conforming cases.
SuiteResult zstructure_suite();

// Nonnegativity of the nuclear variational gap on random factors and its
// vanishing at balanced SVD splits.
SuiteResult nuclear_suite();

// Contrastive bound on 1e4 random logit vectors per loss, equality at equal
// off-targets, and uniqueness/nonpositivity of argmin phi(t) + c|t|.
SuiteResult contrastive_suite();

// Logit-Hessian PSD-ness: CE/LS everywhere, FL on p_k >= 0.21.
SuiteResult hessian_psd_suite();

// grad_check over 10 seeded random states per loss kind; pass iff <= 1e-6.
SuiteResult grad_check_suite(const ufm::Hyper& hyper);

// Dispatch by name: dpr1, zstructure, nuclear, contrastive, hessian-psd.
SuiteResult run_lemma_suite(const std::string& which);

// Seeded Gaussian state, in the same draw order as the trainer init.
ufm::UfmState random_state(const ufm::Hyper& hyper, double sigma, std::uint64_t seed);

}  // namespace collapse::suites
