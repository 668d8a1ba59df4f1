#pragma once

// Artifact plumbing: JSON serialization of configs, candidates and
// certificates, CSV exports for plotting, paired scheme/step-size return
// metrics, the end-to-end search -> detect -> prove -> certify pipeline, and
// run manifests tying every output file to the invocation that produced it.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "orbitcert/certify.hpp"
#include "orbitcert/controllers.hpp"
#include "orbitcert/dynamics.hpp"
#include "orbitcert/json_util.hpp"
#include "orbitcert/prover.hpp"
#include "orbitcert/search.hpp"

namespace orbitcert {

inline constexpr const char* kToolVersion = "orbitcert 1.0.0";

// ---------------------------------------------------------------------------
// Run manifests

/// Record of one CLI invocation. Every output file carries the same run_id
/// (JSON field or leading CSV comment), so each artifact can be traced back
/// to the manifest — and the manifest lists digests of everything written.
struct RunManifest {
    std::string command;
    Json config_snapshot;
    std::uint64_t seed = 0;
    std::string tool_version = kToolVersion;
    std::map<std::string, std::string> input_digests;   // path -> fnv1a64 hex
    std::map<std::string, std::string> output_digests;  // path -> fnv1a64 hex
    double wall_ms = 0.0;
    std::string run_id;
};

/// Deterministic run identifier: hash of command, config snapshot, and seed.
std::string make_run_id(const std::string& command, const Json& config_snapshot,
                        std::uint64_t seed);

Json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const Json& j);

// ---------------------------------------------------------------------------
// JSON schemas (all floating-point values as shortest round-trip decimal
// strings; see json_util)

Json config_to_json(const MdpConfig& config);
MdpConfig config_from_json(const Json& j);

Json orbit_candidate_to_json(const OrbitCandidate& candidate);
OrbitCandidate orbit_candidate_from_json(const Json& j);

Json certificate_to_json(const ProofCertificate& certificate);
ProofCertificate certificate_from_json(const Json& j);

Json persistent_to_json(const PersistentCertificate& certificate);
PersistentCertificate persistent_from_json(const Json& j);

Json search_candidates_to_json(const std::vector<Candidate>& candidates);
std::vector<Candidate> search_candidates_from_json(const Json& j);

// ---------------------------------------------------------------------------
// CSV exports (plot data; first line is "# run_id=..." when run_id nonempty)

std::string trajectory_csv(const MdpConfig& config, const Trajectory& trajectory,
                           const std::string& run_id = "");

/// Per-step midpoints and radii of a rigorous rollout, with reward bounds and
/// the persistence status of each step.
std::string enclosure_csv(const PersistentCertificate& certificate,
                          const std::string& run_id = "");

// ---------------------------------------------------------------------------
// Paired return metrics over a scheme x step-size grid

struct ReturnCell {
    Scheme scheme = Scheme::SemiImplicit;
    double h = 0.0;
    double mean_return = 0.0;
    double std_return = 0.0;
    double mean_penalty = 0.0;  // pendulum: -return; cartpole: shaped penalty
    double std_penalty = 0.0;
    std::vector<double> returns;  // per-episode, IC-aligned across cells
};

struct DiscrepancyRow {
    double h = 0.0;
    double mean_abs = 0.0;  // mean over ICs of |return_E - return_SI|
    double std_abs = 0.0;
};

struct ReturnsReport {
    std::vector<ReturnCell> cells;            // {E, SI} x {h, h/2}
    std::vector<DiscrepancyRow> discrepancy;  // one row per step size
    int n_episodes = 0;
};

/// Rolls out n_episodes ICs sampled from the config's initial distribution,
/// reusing the same ICs in every grid cell so the E/SI discrepancy is paired
/// per IC. Episode e draws from Rng(derive_seed(seed, e)).
ReturnsReport eval_returns(const MdpConfig& base, const ControllerSpec& controller,
                           int n_episodes, std::uint64_t seed);

std::string returns_csv(const ReturnsReport& report, const std::string& run_id = "");

// ---------------------------------------------------------------------------
// Candidate adapters

/// Wrap a detected recurrence into a provable candidate.
OrbitCandidate candidate_from_period(const MdpConfig& config,
                                     const std::string& controller_name,
                                     const PeriodCandidate& period);

/// Roll out m steps from a claimed on-orbit point and take those states as
/// the candidate loop. This is the right constructor for externally supplied
/// (initial condition, period, turns) claims: detection is unnecessary and a
/// truncated-precision point may sit on an unstable orbit whose neighborhood
/// a long trajectory leaves before any recurrence fires.
OrbitCandidate candidate_from_rollout(const MdpConfig& config,
                                      const ControllerSpec& controller,
                                      const std::vector<double>& ic, int m, int j);

// ---------------------------------------------------------------------------
// End-to-end pipeline

struct PipelineOptions {
    SearchConfig search;           // restarts = 0 skips the search entirely
    int threshold_episodes = 100;  // episodes used to estimate the threshold M
    int top_k = 3;                 // candidates carried past the threshold filter
    int detect_max = 5;            // periodic candidates tried per search hit
    double recurrence_tol = 0.05;
    ProveOptions prove;
    double blow_up_cap = kDefaultBlowUpCap;

    /// Extra starting points merged with the search output (e.g. worst ICs
    /// from evaluation episodes); ranked and filtered like searched ones.
    std::vector<std::vector<double>> seed_ics;

    /// When set, used as the badness threshold M instead of estimating it
    /// from this config. Useful when the threshold should come from the
    /// controller's native configuration but the run probes a transfer
    /// configuration whose random episodes are already far worse.
    std::optional<double> threshold_override;
};

/// One searched IC with everything derived from it. A proof failure never
/// suppresses the persistent certificate: the interval rollout is always
/// emitted, matching the fall-through control flow of the search procedure.
struct PipelineItem {
    Candidate candidate;
    std::vector<ProofCertificate> proofs;       // successful proofs only
    std::vector<std::string> proof_failures;    // diagnostic messages
    PersistentCertificate persistent;
};

struct PipelineResult {
    double threshold_M = 0.0;
    std::vector<PipelineItem> items;
    bool any_proof_failed = false;  // some detected loop resisted every proof attempt
};

PipelineResult run_pipeline(const MdpConfig& config, const ControllerSpec& controller,
                            const PipelineOptions& options);

Json pipeline_summary_to_json(const PipelineResult& result);

}  // namespace orbitcert
