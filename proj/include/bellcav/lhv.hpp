#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "bellcav/behavior.hpp"
#include "bellcav/rng.hpp"

namespace bellcav::lhv {

inline constexpr double kAlgebraTol = 1e-12;

/// Discrete hidden-variable space.
struct HiddenSpace {
  std::size_t cardinality = 1;

  void validate() const {
    if (cardinality < 1) throw std::invalid_argument("hidden space must have cardinality >= 1");
  }

  friend bool operator==(const HiddenSpace&, const HiddenSpace&) = default;
};

/// Response function: probability of each outcome given setting and hidden
/// state. values[outcome][setting][state], outcomes summing to one per
/// (setting, state). Indicator-valued instances are the deterministic case.
struct ResponseFunction {
  std::size_t space = 0;
  std::array<std::array<std::vector<double>, 2>, 2> values{};  // [outcome][setting][state]

  double at(int outcome, int setting, std::size_t state) const {
    return values[outcome][setting][state];
  }

  static ResponseFunction constant(std::size_t space, double p_outcome0) {
    ResponseFunction f;
    f.space = space;
    for (int x = 0; x < 2; ++x) {
      f.values[0][x].assign(space, p_outcome0);
      f.values[1][x].assign(space, 1.0 - p_outcome0);
    }
    return f;
  }

  /// Indicator responses from a deterministic outcome map (setting, state) -> outcome.
  template <typename OutcomeMap>
  static ResponseFunction indicator(std::size_t space, OutcomeMap&& outcome_of) {
    ResponseFunction f;
    f.space = space;
    for (int x = 0; x < 2; ++x) {
      f.values[0][x].assign(space, 0.0);
      f.values[1][x].assign(space, 0.0);
      for (std::size_t s = 0; s < space; ++s) f.values[outcome_of(x, s) & 1][x][s] = 1.0;
    }
    return f;
  }

  void validate(double tol = kAlgebraTol) const {
    if (space < 1) throw std::invalid_argument("response function over empty hidden space");
    for (int a = 0; a < 2; ++a)
      for (int x = 0; x < 2; ++x)
        if (values[a][x].size() != space)
          throw std::invalid_argument("response function dimension mismatch");
    for (int x = 0; x < 2; ++x)
      for (std::size_t s = 0; s < space; ++s) {
        double sum = 0.0;
        for (int a = 0; a < 2; ++a) {
          const double v = values[a][x][s];
          if (!(v >= -tol && v <= 1.0 + tol))
            throw std::invalid_argument("response value outside [0,1]: " + std::to_string(v));
          sum += v;
        }
        if (std::abs(sum - 1.0) > tol)
          throw std::invalid_argument("response outcomes do not sum to 1");
      }
  }

  friend bool operator==(const ResponseFunction&, const ResponseFunction&) = default;
};

/// Joint mass over the two hidden spaces, rho[xi][eta].
struct JointDistribution {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> mass;

  double at(std::size_t i, std::size_t j) const { return mass[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return mass[i * cols + j]; }

  static JointDistribution point_mass(std::size_t rows, std::size_t cols, std::size_t i,
                                      std::size_t j) {
    JointDistribution d;
    d.rows = rows;
    d.cols = cols;
    d.mass.assign(rows * cols, 0.0);
    d.at(i, j) = 1.0;
    return d;
  }

  void validate(double tol = kAlgebraTol) const {
    if (rows < 1 || cols < 1 || mass.size() != rows * cols)
      throw std::invalid_argument("joint distribution dimension mismatch");
    double total = 0.0;
    for (double v : mass) {
      if (v < -tol) throw std::invalid_argument("joint distribution has negative mass");
      total += v;
    }
    if (std::abs(total - 1.0) > tol)
      throw std::invalid_argument("joint distribution mass is not 1");
  }

  friend bool operator==(const JointDistribution&, const JointDistribution&) = default;
};

/// Standard local hidden-variable model: shared joint distribution plus one
/// response function per party.
struct LhvModel {
  HiddenSpace alice_space;
  HiddenSpace bob_space;
  ResponseFunction alice_response;
  ResponseFunction bob_response;
  JointDistribution joint;

  void validate() const {
    alice_space.validate();
    bob_space.validate();
    alice_response.validate();
    bob_response.validate();
    joint.validate();
    if (alice_response.space != alice_space.cardinality ||
        bob_response.space != bob_space.cardinality || joint.rows != alice_space.cardinality ||
        joint.cols != bob_space.cardinality)
      throw std::invalid_argument("LHV model dimensions are inconsistent");
  }

  friend bool operator==(const LhvModel&, const LhvModel&) = default;
};

/// Stochastic transformation of a hidden-variable distribution,
/// t[state_out][state_in], column-stochastic: sum_out t[out][in] = 1.
struct Kernel {
  std::size_t out_dim = 0;
  std::size_t in_dim = 0;
  std::vector<double> t;

  double at(std::size_t out, std::size_t in) const { return t[out * in_dim + in]; }
  double& at(std::size_t out, std::size_t in) { return t[out * in_dim + in]; }

  static Kernel identity(std::size_t n) {
    Kernel k;
    k.out_dim = k.in_dim = n;
    k.t.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) k.at(i, i) = 1.0;
    return k;
  }

  /// Every column a point mass on `target`: an absorbing operation.
  static Kernel collapse_to(std::size_t n, std::size_t target) {
    Kernel k;
    k.out_dim = k.in_dim = n;
    k.t.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) k.at(target, j) = 1.0;
    return k;
  }

  template <typename Perm>
  static Kernel permutation(std::size_t n, Perm&& image_of) {
    Kernel k;
    k.out_dim = k.in_dim = n;
    k.t.assign(n * n, 0.0);
    for (std::size_t j = 0; j < n; ++j) k.at(image_of(j), j) = 1.0;
    return k;
  }

  void validate(double tol = kAlgebraTol) const {
    if (out_dim < 1 || in_dim < 1 || t.size() != out_dim * in_dim)
      throw std::invalid_argument("kernel dimension mismatch");
    for (std::size_t j = 0; j < in_dim; ++j) {
      double col = 0.0;
      for (std::size_t i = 0; i < out_dim; ++i) {
        const double v = at(i, j);
        if (!(v >= -tol && v <= 1.0 + tol))
          throw std::invalid_argument("kernel entry outside [0,1]");
        col += v;
      }
      if (std::abs(col - 1.0) > tol)
        throw std::invalid_argument("kernel column " + std::to_string(j) + " does not sum to 1");
    }
  }

  friend bool operator==(const Kernel&, const Kernel&) = default;
};

/// Apparatus-level model: base LHV data plus one kernel per party and
/// setting, describing how selecting a setting acts on the local apparatus
/// distribution.
struct ApparatusModel {
  LhvModel base;
  std::array<Kernel, 2> alice_kernels;
  std::array<Kernel, 2> bob_kernels;

  void validate() const {
    base.validate();
    for (int x = 0; x < 2; ++x) {
      alice_kernels[x].validate();
      bob_kernels[x].validate();
      if (alice_kernels[x].in_dim != base.alice_space.cardinality ||
          alice_kernels[x].out_dim != base.alice_space.cardinality)
        throw std::invalid_argument("alice kernel dimensions do not match hidden space");
      if (bob_kernels[x].in_dim != base.bob_space.cardinality ||
          bob_kernels[x].out_dim != base.bob_space.cardinality)
        throw std::invalid_argument("bob kernel dimensions do not match hidden space");
    }
  }

  friend bool operator==(const ApparatusModel&, const ApparatusModel&) = default;
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// P(a,b|x,y) = sum_{xi,eta} rho(xi,eta) F_x^a(xi) G_y^b(eta).
inline BehaviorTable behavior_from_lhv(const LhvModel& model) {
  model.validate();
  const std::size_t na = model.alice_space.cardinality;
  const std::size_t nb = model.bob_space.cardinality;
  BehaviorTable table;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          // Contract Bob's side first, then Alice's.
          double total = 0.0;
          for (std::size_t xi = 0; xi < na; ++xi) {
            double inner = 0.0;
            for (std::size_t eta = 0; eta < nb; ++eta)
              inner += model.joint.at(xi, eta) * model.bob_response.at(b, y, eta);
            total += model.alice_response.at(a, x, xi) * inner;
          }
          table.at(a, b, x, y) = total;
        }
  table.validate();
  if (table.signaling() > 1e-9)
    throw std::runtime_error("LHV behavior violates no-signaling; model arithmetic is broken");
  return table;
}

/// Kernel action on a marginal distribution: out[i] = sum_j t[i][j] d[j].
inline std::vector<double> apply_kernel(const Kernel& kernel, const std::vector<double>& dist) {
  kernel.validate();
  if (dist.size() != kernel.in_dim)
    throw std::invalid_argument("apply_kernel: distribution dimension mismatch");
  std::vector<double> out(kernel.out_dim, 0.0);
  for (std::size_t i = 0; i < kernel.out_dim; ++i)
    for (std::size_t j = 0; j < kernel.in_dim; ++j) out[i] += kernel.at(i, j) * dist[j];
  return out;
}

/// Product-kernel action on the joint: the two parties' operations act on
/// their own spaces only, mu'(xi,eta) = sum T_a(xi,xi') T_b(eta,eta') mu(xi',eta').
inline JointDistribution product_kernel_joint(const Kernel& t_alice, const Kernel& t_bob,
                                              const JointDistribution& joint) {
  t_alice.validate();
  t_bob.validate();
  joint.validate();
  if (t_alice.in_dim != joint.rows || t_bob.in_dim != joint.cols)
    throw std::invalid_argument("product_kernel_joint: dimension mismatch");

  // Contract Alice's index, then Bob's.
  JointDistribution half;
  half.rows = t_alice.out_dim;
  half.cols = joint.cols;
  half.mass.assign(half.rows * half.cols, 0.0);
  for (std::size_t i = 0; i < half.rows; ++i)
    for (std::size_t jp = 0; jp < joint.rows; ++jp) {
      const double w = t_alice.at(i, jp);
      if (w == 0.0) continue;
      for (std::size_t e = 0; e < joint.cols; ++e) half.at(i, e) += w * joint.at(jp, e);
    }

  JointDistribution out;
  out.rows = t_alice.out_dim;
  out.cols = t_bob.out_dim;
  out.mass.assign(out.rows * out.cols, 0.0);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) {
      double acc = 0.0;
      for (std::size_t ep = 0; ep < half.cols; ++ep) acc += t_bob.at(j, ep) * half.at(i, ep);
      out.at(i, j) = acc;
    }
  out.validate();
  return out;
}

/// Kernel-composed response, one kernel per setting:
/// tilde f_x^a(s') = sum_s f_x^a(s) T_x(s, s'). Column stochasticity makes the
/// result a response function again (bounded by one, outcomes summing to one);
/// validated on return rather than taken on faith.
inline ResponseFunction tilded_response(const ResponseFunction& response,
                                        const std::array<Kernel, 2>& kernels) {
  response.validate();
  for (int x = 0; x < 2; ++x) {
    kernels[x].validate();
    if (kernels[x].out_dim != response.space)
      throw std::invalid_argument("tilded_response: kernel output dimension mismatch");
  }
  ResponseFunction out;
  out.space = kernels[0].in_dim;
  if (kernels[1].in_dim != out.space)
    throw std::invalid_argument("tilded_response: kernels disagree on input dimension");
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x) {
      out.values[a][x].assign(out.space, 0.0);
      for (std::size_t sp = 0; sp < out.space; ++sp) {
        double acc = 0.0;
        for (std::size_t s = 0; s < response.space; ++s)
          acc += response.at(a, x, s) * kernels[x].at(s, sp);
        out.values[a][x][sp] = acc;
      }
    }
  out.validate();
  return out;
}

/// Setting-dependent behavior computed directly: for each (x,y) transform the
/// joint by the product kernels, then average the responses,
/// P(a,b|x,y) = sum mu_{x,y}(xi,eta) f_x^a(xi) g_y^b(eta).
inline BehaviorTable apparatus_behavior_direct(const ApparatusModel& model) {
  model.validate();
  const std::size_t na = model.base.alice_space.cardinality;
  const std::size_t nb = model.base.bob_space.cardinality;
  BehaviorTable table;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 2; ++y) {
      const JointDistribution mu_xy =
          product_kernel_joint(model.alice_kernels[x], model.bob_kernels[y], model.base.joint);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double total = 0.0;
          for (std::size_t xi = 0; xi < na; ++xi)
            for (std::size_t eta = 0; eta < nb; ++eta)
              total += mu_xy.at(xi, eta) * model.base.alice_response.at(a, x, xi) *
                       model.base.bob_response.at(b, y, eta);
          table.at(a, b, x, y) = total;
        }
    }
  table.validate();
  return table;
}

/// Rewrite the apparatus model in standard local form: the original joint
/// distribution with kernel-composed (tilded) responses. The returned model
/// reproduces apparatus_behavior_direct entrywise, which is what confines
/// apparatus-level statistics to the local set.
inline LhvModel reduce_apparatus_model(const ApparatusModel& model) {
  model.validate();
  LhvModel reduced;
  reduced.alice_space = model.base.alice_space;
  reduced.bob_space = model.base.bob_space;
  reduced.joint = model.base.joint;
  reduced.alice_response = tilded_response(model.base.alice_response, model.alice_kernels);
  reduced.bob_response = tilded_response(model.base.bob_response, model.bob_kernels);
  reduced.validate();
  return reduced;
}

// ---------------------------------------------------------------------------
// Random model generation (full-support, for property sweeps)
// ---------------------------------------------------------------------------

inline ResponseFunction random_response(RandomStream& rng, std::size_t space) {
  ResponseFunction f;
  f.space = space;
  for (int x = 0; x < 2; ++x) {
    f.values[0][x].resize(space);
    f.values[1][x].resize(space);
    for (std::size_t s = 0; s < space; ++s) {
      const double p0 = rng.next_double();
      f.values[0][x][s] = p0;
      f.values[1][x][s] = 1.0 - p0;
    }
  }
  return f;
}

inline JointDistribution random_joint(RandomStream& rng, std::size_t rows, std::size_t cols) {
  JointDistribution d;
  d.rows = rows;
  d.cols = cols;
  d.mass = sample_simplex(rng, rows * cols);
  return d;
}

inline Kernel random_kernel(RandomStream& rng, std::size_t n) {
  Kernel k;
  k.out_dim = k.in_dim = n;
  k.t.resize(n * n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto col = sample_simplex(rng, n);
    for (std::size_t i = 0; i < n; ++i) k.at(i, j) = col[i];
  }
  return k;
}

inline LhvModel random_lhv_model(RandomStream& rng, std::size_t na, std::size_t nb) {
  LhvModel m;
  m.alice_space = {na};
  m.bob_space = {nb};
  m.alice_response = random_response(rng, na);
  m.bob_response = random_response(rng, nb);
  m.joint = random_joint(rng, na, nb);
  return m;
}

inline ApparatusModel random_apparatus_model(RandomStream& rng, std::size_t na, std::size_t nb) {
  ApparatusModel m;
  m.base = random_lhv_model(rng, na, nb);
  for (int x = 0; x < 2; ++x) {
    m.alice_kernels[x] = random_kernel(rng, na);
    m.bob_kernels[x] = random_kernel(rng, nb);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization (nested arrays of numbers)
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const ResponseFunction& f) {
  j = nlohmann::json{{"space", f.space},
                     {"values",
                      {{f.values[0][0], f.values[0][1]}, {f.values[1][0], f.values[1][1]}}}};
}

inline void from_json(const nlohmann::json& j, ResponseFunction& f) {
  f.space = j.at("space").get<std::size_t>();
  for (int a = 0; a < 2; ++a)
    for (int x = 0; x < 2; ++x)
      f.values[a][x] = j.at("values").at(a).at(x).get<std::vector<double>>();
}

inline void to_json(nlohmann::json& j, const JointDistribution& d) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < d.rows; ++i) {
    auto row = nlohmann::json::array();
    for (std::size_t k = 0; k < d.cols; ++k) row.push_back(d.at(i, k));
    rows.push_back(row);
  }
  j = nlohmann::json{{"rho", rows}};
}

inline void from_json(const nlohmann::json& j, JointDistribution& d) {
  const auto& rows = j.at("rho");
  d.rows = rows.size();
  d.cols = d.rows > 0 ? rows.at(0).size() : 0;
  d.mass.resize(d.rows * d.cols);
  for (std::size_t i = 0; i < d.rows; ++i)
    for (std::size_t k = 0; k < d.cols; ++k) d.at(i, k) = rows.at(i).at(k).get<double>();
}

inline void to_json(nlohmann::json& j, const Kernel& k) {
  auto rows = nlohmann::json::array();
  for (std::size_t i = 0; i < k.out_dim; ++i) {
    auto row = nlohmann::json::array();
    for (std::size_t c = 0; c < k.in_dim; ++c) row.push_back(k.at(i, c));
    rows.push_back(row);
  }
  j = nlohmann::json{{"t", rows}};
}

inline void from_json(const nlohmann::json& j, Kernel& k) {
  const auto& rows = j.at("t");
  k.out_dim = rows.size();
  k.in_dim = k.out_dim > 0 ? rows.at(0).size() : 0;
  k.t.resize(k.out_dim * k.in_dim);
  for (std::size_t i = 0; i < k.out_dim; ++i)
    for (std::size_t c = 0; c < k.in_dim; ++c) k.at(i, c) = rows.at(i).at(c).get<double>();
}

inline void to_json(nlohmann::json& j, const LhvModel& m) {
  j = nlohmann::json{{"alice_space", m.alice_space.cardinality},
                     {"bob_space", m.bob_space.cardinality},
                     {"alice_response", m.alice_response},
                     {"bob_response", m.bob_response},
                     {"joint", m.joint}};
}

inline void from_json(const nlohmann::json& j, LhvModel& m) {
  m.alice_space.cardinality = j.at("alice_space").get<std::size_t>();
  m.bob_space.cardinality = j.at("bob_space").get<std::size_t>();
  m.alice_response = j.at("alice_response").get<ResponseFunction>();
  m.bob_response = j.at("bob_response").get<ResponseFunction>();
  m.joint = j.at("joint").get<JointDistribution>();
}

inline void to_json(nlohmann::json& j, const ApparatusModel& m) {
  j = nlohmann::json{{"base", m.base},
                     {"alice_kernels", {m.alice_kernels[0], m.alice_kernels[1]}},
                     {"bob_kernels", {m.bob_kernels[0], m.bob_kernels[1]}}};
}

inline void from_json(const nlohmann::json& j, ApparatusModel& m) {
  m.base = j.at("base").get<LhvModel>();
  for (int x = 0; x < 2; ++x) {
    m.alice_kernels[x] = j.at("alice_kernels").at(x).get<Kernel>();
    m.bob_kernels[x] = j.at("bob_kernels").at(x).get<Kernel>();
  }
}

}  // namespace bellcav::lhv
