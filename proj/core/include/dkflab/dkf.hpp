#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <vector>

#include "dkflab/graph.hpp"
#include "dkflab/model.hpp"

namespace dkflab {

/// What to do when the consensus information rate Θ_{i,k,l*} is not positive
/// semidefinite at finalize time: use it raw (none), replace it with its
/// nearest PSD projection (project), or abort so the caller can rerun with a
/// larger l* (require_large_lstar).
enum class PsdGuard { none, project, require_large_lstar };

struct DkfGains {
  Eigen::VectorXd alpha_lambda;   // per-node, > 0
  Eigen::VectorXd alpha_upsilon;  // per-node, > 0
  Eigen::VectorXd epsilon;        // per-node, > 0
  int l_star = 1;
  PsdGuard guard = PsdGuard::project;

  static DkfGains uniform(int node_count, double alpha_lambda, double alpha_upsilon,
                          double epsilon, int l_star, PsdGuard guard = PsdGuard::project);
};

struct GainCheck {
  int node = 0;
  double alpha_lambda = 0.0;
  double alpha_upsilon = 0.0;
  bool lambda_ok = false;
  bool upsilon_ok = false;
};

struct GainReport {
  double bound = 0.0;  // 2 / sigma_bar^2, strict
  bool all_ok = false;
  std::vector<GainCheck> nodes;
};

/// Checks every per-node gain against the strict bound 2/σ̄². In strict mode
/// a violation raises GainOutOfRange; in lax mode the report carries the
/// per-node verdicts (used by the counterexample experiments).
GainReport validate_gains(const DkfGains& gains, const SpectralData& spectral, bool strict);

/// Per-node estimator state. theta/upsilon live in vech space and carry over
/// across time steps; xi/lambda are reset at the start of every correction.
struct EstimatorState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd p;
  Eigen::VectorXd x_pred;
  Eigen::MatrixXd p_pred;
  Eigen::MatrixXd p_pred_inv;
  Eigen::VectorXd xi;
  Eigen::VectorXd lambda;
  Eigen::VectorXd theta;
  Eigen::VectorXd upsilon;
  Eigen::MatrixXd k_inno;  // (H'R⁻¹H + P_pred⁻¹/N)⁻¹ H'R⁻¹
  Eigen::MatrixXd k_cons;  // (H'R⁻¹H + P_pred⁻¹/N)⁻¹
  double k_dual = 0.0;     // K^dual = k_dual · I with k_dual = 1/(‖N P_pred‖₂ + ε)
  Eigen::VectorXd omega_delta;  // vech(H_i' R_i⁻¹ H_i)
  Eigen::VectorXd xi_base;      // x_pred + K_inno (y − H x_pred), fixed within a step
};

/// θ starts at vech(H_i'R_i⁻¹H_i), υ at zero.
EstimatorState init_estimator(const PlantModel& model, int node, const Eigen::VectorXd& x0,
                              const Eigen::MatrixXd& p0);

/// x_pred = F x̂, P_pred = F P Fᵀ + Q, then the three correction gains are
/// recomputed from P_pred. ‖·‖ in K^dual is the induced 2-norm.
void local_predict(EstimatorState& state, const PlantModel& model, int node, double epsilon);

/// Resets xi to x_pred and lambda to zero, and caches the innovation part of
/// the primal update for the step's measurement y_i. theta/upsilon carry
/// over untouched.
void begin_correction(EstimatorState& state, const PlantModel& model, int node,
                      const Eigen::VectorXd& y);

/// Message payload as dumped to trace files; field order is fixed as listed.
/// Phase A carries (xi, theta), phase B carries (lambda, upsilon).
struct Message {
  int from = 0;
  int to = 0;
  int k = 0;
  int l = 0;
  char phase = 'A';
  const Eigen::VectorXd* vec = nullptr;  // xi (A) or lambda (B)
  const Eigen::VectorXd* sym = nullptr;  // theta (A) or upsilon (B)
};

using MessageSink = std::function<void(const Message&)>;

/// Writes one JSON line per message with the fixed field order
/// {from, to, k, l, phase, xi|lambda, theta|upsilon}.
void write_message_jsonl(std::ostream& out, const Message& message);

/// Double-buffered per-phase mailbox owned by the round scheduler. Nodes may
/// read only the slots of their graph neighbors.
class Mailbox {
 public:
  struct Payload {
    Eigen::VectorXd vec;
    Eigen::VectorXd sym;
  };

  explicit Mailbox(const SensorGraph& graph) : graph_(&graph), slots_(graph.node_count) {}

  void post(int from, Eigen::VectorXd vec, Eigen::VectorXd sym);
  const Payload& from_neighbor(int reader, int neighbor) const;

 private:
  const SensorGraph* graph_;
  std::vector<Payload> slots_;
};

/// One synchronous subiteration l -> l+1 over all nodes: phase A exchanges
/// (xi, theta) and updates the duals, phase B exchanges (lambda, upsilon)
/// and updates the primals. begin_correction must have run for the step.
void correction_subiteration(std::vector<EstimatorState>& states, const SensorGraph& graph,
                             const DkfGains& gains, int k, int l,
                             const MessageSink* sink = nullptr);

/// x̂ = ξ, P = (P_pred⁻¹ + Θ)⁻¹ with the configured PSD guard on Θ.
void finalize_step(EstimatorState& state, PsdGuard guard);

struct NodeSnapshot {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd p;
  Eigen::MatrixXd p_pred;
  Eigen::VectorXd theta;
};

struct RoundTrace {
  int k = 0;
  std::vector<NodeSnapshot> nodes;
  double dual_residual_max = 0.0;        // max over subiterations of ||−H̄ᵀS̄⁻¹(z−H̄ξ)+𝕃λ||₂
  double theta_conservation_err = 0.0;   // max rel. ||Σ_iΘ_i − NΘ†||_F over subiterations
  long long messages_sent = 0;           // 2·l*·Σ_i|N_i|
  double cov_err_max = 0.0;              // max_i ||P* − P_{i,k|k−1}||_F
  double theta_err_max = 0.0;            // max_i ||Θ_{i,k,l*} − Θ†||_F
  double mse = 0.0;                      // (1/N)Σ_i ||x_k − x̂_{i,k}||²
  double consensus_disagreement = 0.0;   // max_{i,j} ||x̂_i − x̂_j||₂
};

struct DkfInit {
  enum class Mode { mean, uniform };

  Eigen::VectorXd x0_mean;
  Eigen::MatrixXd p0;  // P_{i,0}, shared by all nodes
  Mode mode = Mode::uniform;
  double range = 1.0;  // uniform estimates on [-range, range]^n
  std::uint64_t master_seed = 0;
  std::uint64_t trial = 0;
};

/// Per-node initial estimates x̂_{i,0}: the shared mean, or one uniform
/// draw on [-range, range]^n per node from the (master_seed, trial, node)
/// stream.
std::vector<Eigen::VectorXd> initial_estimates(const DkfInit& init, int node_count);

/// Full Algorithm-1 loop over a simulated trajectory. p_star, when given, is
/// the DARE solution used for the per-step covariance error metric.
std::vector<RoundTrace> run_dkf(const PlantModel& model, const SensorGraph& graph,
                                const TruthTrajectory& trajectory, const DkfGains& gains,
                                const DkfInit& init, const Eigen::MatrixXd* p_star = nullptr,
                                const MessageSink* sink = nullptr);

}  // namespace dkflab
