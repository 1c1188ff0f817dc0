// Copyright 2026 The cdl Authors
// SPDX-License-Identifier: Apache-2.0

#include "cdl/he/rlwe.hpp"

#include <gmp.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cdl/error.hpp"
#include "cdl/he/ntt.hpp"

namespace cdl::he {

namespace {

constexpr int kPrimeBits = 60;
constexpr int kEta = 21;                 // centered binomial parameter
constexpr double kSigma = 3.2403703492;  // sqrt(kEta / 2)
constexpr double kSizingMarginBits = 8.0;
constexpr double kMinDecryptBudget = 1.0;
constexpr std::size_t kMaxBasePrimes = 16;

// RAII wrapper so GMP temporaries cannot leak on exceptions.
struct Mpz {
  mpz_t v;
  Mpz() { mpz_init(v); }
  explicit Mpz(u64 x) {
    mpz_init(v);
    mpz_import(v, 1, -1, sizeof(x), 0, 0, &x);
  }
  ~Mpz() { mpz_clear(v); }
  Mpz(const Mpz&) = delete;
  Mpz& operator=(const Mpz&) = delete;
};

u64 mpz_mod_u64(const mpz_t a, u64 m) {
  Mpz mm(m), r;
  mpz_fdiv_r(r.v, a, mm.v);
  u64 out = 0;
  mpz_export(&out, nullptr, -1, sizeof(out), 0, 0, r.v);
  return out;
}

void product(mpz_t out, const std::vector<Modulus>& ms) {
  mpz_set_ui(out, 1);
  for (const Modulus& m : ms) {
    Mpz f(m.value());
    mpz_mul(out, out, f.v);
  }
}

double log2_mpz(const mpz_t a) {
  if (mpz_sgn(a) == 0) return -std::numeric_limits<double>::infinity();
  long e = 0;
  const double d = mpz_get_d_2exp(&e, a);
  return std::log2(std::abs(d)) + static_cast<double>(e);
}

double log2_add(double a, double b) {
  const double hi = std::max(a, b);
  if (!std::isfinite(hi)) return hi;
  return hi + std::log2(std::exp2(a - hi) + std::exp2(b - hi));
}

// Exact centered base conversion: x mod M (residues over `from`) to the
// residues over `to` of the representative in (-M/2, M/2].
struct BaseConverter {
  std::vector<Modulus> from;
  std::vector<Modulus> to;
  std::vector<ShoupConst> hat_inv;
  std::vector<std::vector<u64>> hat_mod;  // [i][j] = (M / m_i) mod to_j
  std::vector<u64> m_mod;                 // M mod to_j
  std::vector<double> inv;                // 1 / m_i

  BaseConverter() = default;
  BaseConverter(std::vector<Modulus> f, std::vector<Modulus> t) : from(std::move(f)), to(std::move(t)) {
    Mpz M, Mi;
    product(M.v, from);
    hat_mod.assign(from.size(), std::vector<u64>(to.size()));
    for (std::size_t i = 0; i < from.size(); ++i) {
      Mpz mi(from[i].value());
      mpz_divexact(Mi.v, M.v, mi.v);
      const u64 hi = from[i].inv(mpz_mod_u64(Mi.v, from[i].value()));
      hat_inv.emplace_back(hi, from[i].value());
      for (std::size_t j = 0; j < to.size(); ++j) hat_mod[i][j] = mpz_mod_u64(Mi.v, to[j].value());
      inv.push_back(1.0 / static_cast<double>(from[i].value()));
    }
    for (const Modulus& tj : to) m_mod.push_back(mpz_mod_u64(M.v, tj.value()));
  }

  void convert(const u64* in, u64* out, std::size_t n) const {
    const std::size_t kf = from.size();
    const std::size_t kt = to.size();
    u64 y[kMaxBasePrimes];
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t i = 0; i < kf; ++i) {
        y[i] = hat_inv[i].mul(in[i * n + c], from[i].value());
        s += static_cast<double>(y[i]) * inv[i];
      }
      const u64 v = static_cast<u64>(std::llround(s));
      for (std::size_t j = 0; j < kt; ++j) {
        u128 acc = 0;
        for (std::size_t i = 0; i < kf; ++i) acc += static_cast<u128>(y[i]) * hat_mod[i][j];
        const u64 r = to[j].reduce128(acc);
        out[j * n + c] = to[j].sub(r, to[j].mul(v % to[j].value(), m_mod[j]));
      }
    }
  }
};

}  // namespace

struct RlweBackend::Impl {
  std::size_t n = 0;
  std::size_t k = 0;  // primes in Q
  std::size_t m = 0;  // primes in P
  std::vector<u64> q_values;
  std::vector<Modulus> qs;
  std::vector<Modulus> ps;
  std::vector<Modulus> qp;  // qs then ps
  std::vector<NttTables> ntt_qp;
  Modulus t;
  std::unique_ptr<NttTables> ntt_t;
  double log_q = 0.0;
  u64 q_max = 0;

  std::vector<ShoupConst> delta;  // floor(Q / t) mod q_i

  BaseConverter q_to_p;
  BaseConverter p_to_q;

  // Scaling round(t x / Q) from base QP to base P.
  std::vector<u64> theta;                // frac(t P nu_i / q_i) * 2^64
  std::vector<std::vector<u64>> omega;   // [i][j] floor(t P nu_i / q_i) mod p_j
  std::vector<ShoupConst> gamma;         // t Q^-1 mod p_j

  // Decryption: t mu_i = a_i q_i + w_i with mu_i = (Q/q_i)^-1 mod q_i.
  std::vector<u64> dec_a;  // a_i mod t
  std::vector<u64> dec_w;
  std::vector<long double> inv_q;

  // GMP reconstruction constants.
  std::vector<u64> crt_mu;  // (Q/q_i)^-1 mod q_i

  const NttTables& ntt(std::size_t idx) const { return ntt_qp[idx]; }

  // x = c0 + c1 s mod Q in coefficient form.
  std::vector<u64> phase(const SecretKey& sk, const Ciphertext& ct) const {
    std::vector<u64> x = ct.components[1];
    for (std::size_t i = 0; i < k; ++i) {
      const Modulus& q = qs[i];
      u64* xi = x.data() + i * n;
      ntt(i).forward(xi);
      const u64* si = sk.components[0].data() + i * n;
      for (std::size_t c = 0; c < n; ++c) xi[c] = q.mul(xi[c], si[c]);
      ntt(i).inverse(xi);
      const u64* c0 = ct.components[0].data() + i * n;
      for (std::size_t c = 0; c < n; ++c) xi[c] = q.add(xi[c], c0[c]);
    }
    return x;
  }
};

namespace {

double fresh_bits_for(double log_t, std::size_t n) {
  const double v = 8.0 * kSigma * std::sqrt(4.0 * static_cast<double>(n) / 3.0 + 1.0);
  return log2_add(log_t + std::log2(v), 2.0 * log_t);
}

double product_bits_for(double za, double zb, double log_t, std::size_t n, std::size_t k, double log_qmax) {
  const double tensor = log2_add(za, zb) + log_t + std::log2(static_cast<double>(n)) + 2.0;
  const double relin = log_t + log_qmax + 0.5 * std::log2(static_cast<double>(k * n)) + std::log2(kSigma) + 3.0;
  return log2_add(tensor, relin);
}

double plain_product_bits(double z, double log_t, std::size_t n) {
  return z + log_t - 1.0 + 0.5 * std::log2(static_cast<double>(n)) + 2.0;
}

}  // namespace

RlweBackend::RlweBackend(HEParams params) : Backend(std::move(params)), impl_(std::make_unique<Impl>()) {
  if (params_.backend != BackendKind::Rlwe) throw ValidationError("params are not for the rlwe backend");
  Impl& s = *impl_;
  s.n = params_.n;
  s.t = Modulus(params_.p);
  s.ntt_t = std::make_unique<NttTables>(s.n, s.t);
  const double log_t = std::log2(static_cast<double>(params_.p));
  const u64 step = 2 * static_cast<u64>(s.n);

  // Size Q: fresh noise, the plaintext-product allowance, then L products,
  // leaving a safety margin.
  std::size_t k = static_cast<std::size_t>(params_.q_count);
  if (k == 0) {
    for (k = 1; k <= kMaxBasePrimes; ++k) {
      const std::vector<u64> cand = find_primes(kPrimeBits, step, k);
      double lq = 0.0;
      for (u64 q : cand) lq += std::log2(static_cast<double>(q));
      double z = fresh_bits_for(log_t, s.n);
      for (int i = 0; i < params_.plain_mults; ++i) z = plain_product_bits(z, log_t, s.n);
      for (int i = 0; i < params_.L; ++i) z = product_bits_for(z, z, log_t, s.n, k, kPrimeBits);
      if (lq - 1.0 - z >= kSizingMarginBits) break;
    }
    if (k > kMaxBasePrimes) throw CapacityError("cannot size the ciphertext modulus for these parameters");
  }
  if (k > kMaxBasePrimes) throw ValidationError("too many ciphertext primes requested");
  s.k = k;
  s.q_values = find_primes(kPrimeBits, step, k);
  for (u64 q : s.q_values) {
    s.qs.emplace_back(q);
    s.log_q += std::log2(static_cast<double>(q));
    s.q_max = std::max(s.q_max, q);
  }
  // P must hold t * n * Q with room to spare.
  const double need_p = s.log_q + log_t + std::log2(static_cast<double>(s.n)) + 4.0;
  std::vector<u64> p_values;
  double log_p = 0.0;
  while (log_p < need_p) {
    p_values = find_primes(kPrimeBits, step, p_values.size() + 1, s.q_values);
    log_p = 0.0;
    for (u64 p : p_values) log_p += std::log2(static_cast<double>(p));
  }
  s.m = p_values.size();
  if (s.m > kMaxBasePrimes) throw CapacityError("auxiliary base too large");
  for (u64 p : p_values) s.ps.emplace_back(p);
  s.qp = s.qs;
  s.qp.insert(s.qp.end(), s.ps.begin(), s.ps.end());
  for (const Modulus& md : s.qp) s.ntt_qp.emplace_back(s.n, md);

  Mpz Q, P, T(params_.p), tmp, tmp2, qi;
  product(Q.v, s.qs);
  product(P.v, s.ps);

  mpz_fdiv_q(tmp.v, Q.v, T.v);
  for (const Modulus& q : s.qs) s.delta.emplace_back(mpz_mod_u64(tmp.v, q.value()), q.value());

  s.q_to_p = BaseConverter(s.qs, s.ps);
  s.p_to_q = BaseConverter(s.ps, s.qs);

  // nu_i = (Q P / q_i)^-1 mod q_i
  Mpz QP;
  mpz_mul(QP.v, Q.v, P.v);
  s.omega.assign(k, std::vector<u64>(s.m));
  for (std::size_t i = 0; i < k; ++i) {
    Mpz qv(s.qs[i].value());
    mpz_divexact(tmp.v, QP.v, qv.v);
    const u64 nu = s.qs[i].inv(mpz_mod_u64(tmp.v, s.qs[i].value()));
    Mpz nuz(nu);
    mpz_mul(tmp.v, T.v, P.v);
    mpz_mul(tmp.v, tmp.v, nuz.v);  // t P nu_i
    mpz_fdiv_qr(tmp2.v, qi.v, tmp.v, qv.v);
    for (std::size_t j = 0; j < s.m; ++j) s.omega[i][j] = mpz_mod_u64(tmp2.v, s.ps[j].value());
    // theta_i = floor(rem * 2^64 / q_i)
    mpz_mul_2exp(qi.v, qi.v, 64);
    mpz_fdiv_q(qi.v, qi.v, qv.v);
    u64 th = 0;
    mpz_export(&th, nullptr, -1, sizeof(th), 0, 0, qi.v);
    s.theta.push_back(th);
  }
  for (const Modulus& p : s.ps) {
    const u64 qinv = p.inv(mpz_mod_u64(Q.v, p.value()));
    s.gamma.emplace_back(p.mul(params_.p % p.value(), qinv), p.value());
  }

  for (std::size_t i = 0; i < k; ++i) {
    Mpz qv(s.qs[i].value());
    mpz_divexact(tmp.v, Q.v, qv.v);
    const u64 mu = s.qs[i].inv(mpz_mod_u64(tmp.v, s.qs[i].value()));
    s.crt_mu.push_back(mu);
    const u128 tmu = static_cast<u128>(params_.p) * mu;
    s.dec_a.push_back(static_cast<u64>((tmu / s.qs[i].value()) % params_.p));
    s.dec_w.push_back(static_cast<u64>(tmu % s.qs[i].value()));
    s.inv_q.push_back(1.0L / static_cast<long double>(s.qs[i].value()));
  }
}

RlweBackend::~RlweBackend() = default;

std::size_t RlweBackend::q_count() const { return impl_->k; }
std::size_t RlweBackend::p_count() const { return impl_->m; }
const std::vector<u64>& RlweBackend::q_primes() const { return impl_->q_values; }
double RlweBackend::log2_q() const { return impl_->log_q; }

double RlweBackend::fresh_noise_bits() const {
  return fresh_bits_for(std::log2(static_cast<double>(params_.p)), impl_->n);
}

double RlweBackend::product_noise_bits(double z_a, double z_b) const {
  return product_bits_for(z_a, z_b, std::log2(static_cast<double>(params_.p)), impl_->n, impl_->k,
                          std::log2(static_cast<double>(impl_->q_max)));
}

// ---------------------------------------------------------------- helpers

namespace {

using Poly = std::vector<u64>;  // prime-major residues

// Reduces a small signed integer polynomial into every prime of `mods`.
Poly lift_signed(const std::vector<std::int64_t>& v, const std::vector<Modulus>& mods, std::size_t count) {
  const std::size_t n = v.size();
  Poly out(count * n);
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t c = 0; c < n; ++c) out[i * n + c] = mods[i].from_signed(v[c]);
  }
  return out;
}

}  // namespace

void RlweBackend::check(const Ciphertext& ct) const {
  if (ct.backend != BackendKind::Rlwe) throw ValidationError("ciphertext is not an rlwe ciphertext");
  const std::size_t len = impl_->k * impl_->n;
  if (ct.components.size() != 2 || ct.components[0].size() != len || ct.components[1].size() != len) {
    throw ValidationError("rlwe ciphertext has the wrong shape for these parameters");
  }
  if (ct.level > static_cast<std::uint32_t>(params_.L)) throw ValidationError("ciphertext level exceeds L");
}

void RlweBackend::check_values(const Ciphertext& ct) const {
  const Impl& s = *impl_;
  for (const Component& comp : ct.components) {
    for (std::size_t i = 0; i < s.k; ++i) {
      const u64 q = s.qs[i].value();
      for (std::size_t c = 0; c < s.n; ++c) {
        if (comp[i * s.n + c] >= q) throw ValidationError("rlwe residue out of range");
      }
    }
  }
}

// ---------------------------------------------------------------- keys

KeySet RlweBackend::keygen(std::span<const std::uint8_t> seed) const {
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  const std::size_t k = s.k;
  Bytes material(seed.begin(), seed.end());
  const std::string pj = params_to_json(params_, -1);
  material.insert(material.end(), pj.begin(), pj.end());
  const KeyId id = short_hash(material, "cdl-rlwe-keyid");
  Prng rng(seed, "cdl-rlwe-keygen");

  std::vector<std::int64_t> sv(n);
  for (auto& x : sv) x = rng.ternary();
  Poly s_ntt = lift_signed(sv, s.qs, k);
  for (std::size_t i = 0; i < k; ++i) s.ntt(i).forward(s_ntt.data() + i * n);

  const auto uniform_ntt = [&]() {
    Poly a(k * n);
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t c = 0; c < n; ++c) a[i * n + c] = rng.uniform(s.qs[i].value());
    }
    return a;
  };
  const auto error_ntt = [&]() {
    std::vector<std::int64_t> e(n);
    for (auto& x : e) x = rng.centered_binomial(kEta);
    Poly out = lift_signed(e, s.qs, k);
    for (std::size_t i = 0; i < k; ++i) s.ntt(i).forward(out.data() + i * n);
    return out;
  };
  // b = -a s + e, elementwise in the NTT domain.
  const auto rlwe_sample = [&](const Poly& a, const Poly& e) {
    Poly b(k * n);
    for (std::size_t i = 0; i < k; ++i) {
      const Modulus& q = s.qs[i];
      for (std::size_t c = 0; c < n; ++c) {
        const std::size_t x = i * n + c;
        b[x] = q.sub(e[x], q.mul(a[x], s_ntt[x]));
      }
    }
    return b;
  };

  KeySet ks;
  ks.secret.backend = ks.pub.backend = ks.relin.backend = BackendKind::Rlwe;
  ks.secret.kind = KeyKind::Secret;
  ks.pub.kind = KeyKind::Public;
  ks.relin.kind = KeyKind::Relin;
  ks.secret.key_id = ks.pub.key_id = ks.relin.key_id = id;

  {
    Poly a = uniform_ntt();
    Poly e = error_ntt();
    Poly b = rlwe_sample(a, e);
    ks.pub.components = {std::move(b), std::move(a)};
  }
  // rk_i = (-a_i s + e_i + g_i s^2, a_i) with g_i the CRT idempotent of q_i.
  for (std::size_t d = 0; d < k; ++d) {
    Poly a = uniform_ntt();
    Poly e = error_ntt();
    Poly b = rlwe_sample(a, e);
    const Modulus& q = s.qs[d];
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t x = d * n + c;
      b[x] = q.add(b[x], q.mul(s_ntt[x], s_ntt[x]));
    }
    ks.relin.components.push_back(std::move(b));
    ks.relin.components.push_back(std::move(a));
  }
  ks.secret.components = {std::move(s_ntt)};
  return ks;
}

// ---------------------------------------------------------------- encrypt / decrypt

Ciphertext RlweBackend::encrypt(const PublicKey& pk, std::span<const std::uint64_t> slots, Prng& rng) const {
  check_key(pk, KeyKind::Public);
  check_plain(slots, true);
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  const std::size_t k = s.k;
  if (pk.components.size() != 2 || pk.components[0].size() != k * n || pk.components[1].size() != k * n) {
    throw ValidationError("public key does not match these parameters");
  }
  Poly m(n, 0);
  std::copy(slots.begin(), slots.end(), m.begin());
  s.ntt_t->inverse(m.data());

  std::vector<std::int64_t> uv(n), e1(n), e2(n);
  for (auto& x : uv) x = rng.ternary();
  for (auto& x : e1) x = rng.centered_binomial(kEta);
  for (auto& x : e2) x = rng.centered_binomial(kEta);
  Poly u = lift_signed(uv, s.qs, k);
  Poly c0(k * n), c1(k * n);
  for (std::size_t i = 0; i < k; ++i) {
    const Modulus& q = s.qs[i];
    u64* ui = u.data() + i * n;
    s.ntt(i).forward(ui);
    const u64* b = pk.components[0].data() + i * n;
    const u64* a = pk.components[1].data() + i * n;
    u64* r0 = c0.data() + i * n;
    u64* r1 = c1.data() + i * n;
    for (std::size_t c = 0; c < n; ++c) {
      r0[c] = q.mul(b[c], ui[c]);
      r1[c] = q.mul(a[c], ui[c]);
    }
    s.ntt(i).inverse(r0);
    s.ntt(i).inverse(r1);
    for (std::size_t c = 0; c < n; ++c) {
      r0[c] = q.add(q.add(r0[c], q.from_signed(e1[c])), s.delta[i].mul(m[c], q.value()));
      r1[c] = q.add(r1[c], q.from_signed(e2[c]));
    }
  }
  Ciphertext ct;
  ct.backend = BackendKind::Rlwe;
  ct.level = static_cast<std::uint32_t>(params_.L);
  ct.noise_budget = s.log_q - 1.0 - fresh_noise_bits();
  ct.components = {std::move(c0), std::move(c1)};
  return ct;
}

Slots RlweBackend::decrypt(const SecretKey& sk, const Ciphertext& ct) const {
  check_key(sk, KeyKind::Secret);
  check(ct);
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  if (sk.components.size() != 1 || sk.components[0].size() != s.k * n) {
    throw ValidationError("secret key does not match these parameters");
  }
  const std::vector<u64> x = s.phase(sk, ct);
  const u64 t = params_.p;
  Poly m(n);
  long double worst = 0.0L;
  for (std::size_t c = 0; c < n; ++c) {
    u128 acc = 0;
    long double frac = 0.0L;
    for (std::size_t i = 0; i < s.k; ++i) {
      const u64 q = s.qs[i].value();
      const u64 xi = x[i * n + c];
      const u128 prod = static_cast<u128>(xi) * s.dec_w[i];
      const u64 b = static_cast<u64>(prod / q);
      const u64 r = static_cast<u64>(prod - static_cast<u128>(b) * q);
      acc += static_cast<u128>(xi) * s.dec_a[i] + b;
      frac += static_cast<long double>(r) * s.inv_q[i];
    }
    const long double whole = std::floor(frac);
    frac -= whole;
    u64 bump = static_cast<u64>(whole);
    if (frac >= 0.5L) {
      frac -= 1.0L;
      bump += 1;
    }
    worst = std::max(worst, std::fabs(frac));
    m[c] = static_cast<u64>((acc + bump) % t);
  }
  const double budget = worst > 0.0L ? -1.0 - static_cast<double>(std::log2(worst)) : s.log_q;
  if (budget < kMinDecryptBudget) {
    throw NoiseExhausted("noise budget exhausted (measured " + std::to_string(budget) + " bits)");
  }
  s.ntt_t->forward(m.data());
  return m;
}

double RlweBackend::measure_noise_budget(const SecretKey& sk, const Ciphertext& ct) const {
  check_key(sk, KeyKind::Secret);
  check(ct);
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  if (sk.components.size() != 1 || sk.components[0].size() != s.k * n) {
    throw ValidationError("secret key does not match these parameters");
  }
  const std::vector<u64> x = s.phase(sk, ct);
  Mpz Q, acc, term, half, worst, z, tz(params_.p);
  product(Q.v, s.qs);
  mpz_fdiv_q_2exp(half.v, Q.v, 1);
  std::vector<Mpz> basis(s.k);  // (Q/q_i) * mu_i
  for (std::size_t i = 0; i < s.k; ++i) {
    Mpz qv(s.qs[i].value()), mu(s.crt_mu[i]);
    mpz_divexact(basis[i].v, Q.v, qv.v);
    mpz_mul(basis[i].v, basis[i].v, mu.v);
  }
  for (std::size_t c = 0; c < n; ++c) {
    mpz_set_ui(acc.v, 0);
    for (std::size_t i = 0; i < s.k; ++i) {
      Mpz xi(x[i * n + c]);
      mpz_addmul(acc.v, basis[i].v, xi.v);
    }
    mpz_mul(z.v, acc.v, tz.v);
    mpz_fdiv_r(z.v, z.v, Q.v);
    if (mpz_cmp(z.v, half.v) > 0) mpz_sub(z.v, z.v, Q.v);
    mpz_abs(z.v, z.v);
    if (mpz_cmp(z.v, worst.v) > 0) mpz_set(worst.v, z.v);
  }
  if (mpz_sgn(worst.v) == 0) return s.log_q;
  return s.log_q - 1.0 - log2_mpz(worst.v);
}

// ---------------------------------------------------------------- arithmetic

Ciphertext RlweBackend::add(const Ciphertext& a, const Ciphertext& b) const {
  const Ciphertext* both[2] = {&a, &b};
  return add_many(both);
}

Ciphertext RlweBackend::add_many(std::span<const Ciphertext* const> cts) const {
  if (cts.empty()) throw ValidationError("add_many needs at least one ciphertext");
  for (const Ciphertext* c : cts) check(*c);
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  Ciphertext out = *cts[0];
  double z = s.log_q - 1.0 - cts[0]->noise_budget;
  for (std::size_t j = 1; j < cts.size(); ++j) {
    const Ciphertext& c = *cts[j];
    for (int comp = 0; comp < 2; ++comp) {
      u64* dst = out.components[comp].data();
      const u64* src = c.components[comp].data();
      for (std::size_t i = 0; i < s.k; ++i) {
        const u64 q = s.qs[i].value();
        for (std::size_t x = i * n; x < (i + 1) * n; ++x) {
          const u64 v = dst[x] + src[x];
          dst[x] = v >= q ? v - q : v;
        }
      }
    }
    out.level = std::min(out.level, c.level);
    z = log2_add(z, s.log_q - 1.0 - c.noise_budget);
  }
  out.noise_budget = s.log_q - 1.0 - z;
  return out;
}

Ciphertext RlweBackend::add_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const {
  check(ct);
  check_plain(plain, true);
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  Poly m(n, 0);
  std::copy(plain.begin(), plain.end(), m.begin());
  s.ntt_t->inverse(m.data());
  Ciphertext out = ct;
  for (std::size_t i = 0; i < s.k; ++i) {
    const Modulus& q = s.qs[i];
    u64* c0 = out.components[0].data() + i * n;
    for (std::size_t c = 0; c < n; ++c) c0[c] = q.add(c0[c], s.delta[i].mul(m[c], q.value()));
  }
  const double log_t = std::log2(static_cast<double>(params_.p));
  out.noise_budget = s.log_q - 1.0 - log2_add(s.log_q - 1.0 - ct.noise_budget, 2.0 * log_t);
  return out;
}

Ciphertext RlweBackend::add_scalar(const Ciphertext& ct, std::uint64_t v) const {
  check(ct);
  if (v >= params_.p) throw ValidationError("scalar not reduced mod p");
  const Impl& s = *impl_;
  Ciphertext out = ct;
  // A constant polynomial has the same value in every slot.
  for (std::size_t i = 0; i < s.k; ++i) {
    const Modulus& q = s.qs[i];
    u64& c0 = out.components[0][i * s.n];
    c0 = q.add(c0, s.delta[i].mul(v, q.value()));
  }
  const double log_t = std::log2(static_cast<double>(params_.p));
  out.noise_budget = s.log_q - 1.0 - log2_add(s.log_q - 1.0 - ct.noise_budget, 2.0 * log_t);
  return out;
}

Ciphertext RlweBackend::mul_scalar(const Ciphertext& ct, std::uint64_t v) const {
  const Ciphertext* one[1] = {&ct};
  const std::uint64_t w[1] = {v};
  return linear_combination(one, w);
}

Ciphertext RlweBackend::linear_combination(std::span<const Ciphertext* const> cts,
                                           std::span<const std::uint64_t> scalars) const {
  if (cts.empty() || cts.size() != scalars.size()) {
    throw ValidationError("linear_combination needs matching, non-empty ciphertext and scalar lists");
  }
  for (const Ciphertext* c : cts) check(*c);
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  const std::size_t len = s.k * n;
  std::vector<u64> acc0(len, 0), acc1(len, 0);
  double z = -std::numeric_limits<double>::infinity();
  std::uint32_t level = cts[0]->level;
  for (std::size_t j = 0; j < cts.size(); ++j) {
    const Ciphertext& c = *cts[j];
    level = std::min(level, c.level);
    const u64 w = scalars[j];
    if (w >= params_.p) throw ValidationError("scalar not reduced mod p");
    if (w == 0) continue;
    const std::int64_t wc = s.t.centered(w);
    z = log2_add(z, s.log_q - 1.0 - c.noise_budget + std::log2(static_cast<double>(std::llabs(wc))));
    for (std::size_t i = 0; i < s.k; ++i) {
      const Modulus& q = s.qs[i];
      const u64 qv = q.value();
      const u64 two_q = 2 * qv;
      const ShoupConst sw(q.from_signed(wc), qv);
      for (int comp = 0; comp < 2; ++comp) {
        u64* dst = (comp == 0 ? acc0 : acc1).data() + i * n;
        const u64* src = c.components[comp].data() + i * n;
        for (std::size_t x = 0; x < n; ++x) {
          u64 v = dst[x] + sw.mul_lazy(src[x], qv);  // < 4q
          v = v >= two_q ? v - two_q : v;
          dst[x] = v;  // < 2q
        }
      }
    }
  }
  for (std::size_t i = 0; i < s.k; ++i) {
    const u64 qv = s.qs[i].value();
    for (std::size_t x = i * n; x < (i + 1) * n; ++x) {
      if (acc0[x] >= qv) acc0[x] -= qv;
      if (acc1[x] >= qv) acc1[x] -= qv;
    }
  }
  Ciphertext out;
  out.backend = BackendKind::Rlwe;
  out.level = level;
  out.noise_budget = s.log_q - 1.0 - std::max(z, 0.0);
  out.components = {std::move(acc0), std::move(acc1)};
  return out;
}

Ciphertext RlweBackend::mul_plain(const Ciphertext& ct, std::span<const std::uint64_t> plain) const {
  check(ct);
  check_plain(plain, true);
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  Poly m(n, 0);
  std::copy(plain.begin(), plain.end(), m.begin());
  s.ntt_t->inverse(m.data());
  Ciphertext out = ct;
  Poly mq(n);
  for (std::size_t i = 0; i < s.k; ++i) {
    const Modulus& q = s.qs[i];
    for (std::size_t c = 0; c < n; ++c) mq[c] = q.from_signed(s.t.centered(m[c]));
    s.ntt(i).forward(mq.data());
    for (int comp = 0; comp < 2; ++comp) {
      u64* d = out.components[comp].data() + i * n;
      s.ntt(i).forward(d);
      for (std::size_t c = 0; c < n; ++c) d[c] = q.mul(d[c], mq[c]);
      s.ntt(i).inverse(d);
    }
  }
  const double log_t = std::log2(static_cast<double>(params_.p));
  out.noise_budget = s.log_q - 1.0 - plain_product_bits(s.log_q - 1.0 - ct.noise_budget, log_t, n);
  return out;
}

Ciphertext RlweBackend::mul(const Ciphertext& a, const Ciphertext& b, const RelinKey& rk) const {
  check(a);
  check(b);
  check_key(rk, KeyKind::Relin);
  if (a.level == 0 || b.level == 0) throw LevelExhausted("ciphertext multiplication at level 0");
  const Impl& s = *impl_;
  const std::size_t n = s.n;
  const std::size_t k = s.k;
  const std::size_t m = s.m;
  const std::size_t kk = k + m;
  if (rk.components.size() != 2 * k) throw ValidationError("relinearization key does not match these parameters");
  for (const Component& c : rk.components) {
    if (c.size() != k * n) throw ValidationError("relinearization key does not match these parameters");
  }
  const bool square = &a == &b || a.components == b.components;

  // Extend to base QP and move to the NTT domain.
  const auto extend = [&](const Component& c) {
    Poly e(kk * n);
    std::copy(c.begin(), c.end(), e.begin());
    s.q_to_p.convert(c.data(), e.data() + k * n, n);
    for (std::size_t i = 0; i < kk; ++i) s.ntt(i).forward(e.data() + i * n);
    return e;
  };
  const Poly a0 = extend(a.components[0]);
  const Poly a1 = extend(a.components[1]);
  Poly b0_store, b1_store;
  if (!square) {
    b0_store = extend(b.components[0]);
    b1_store = extend(b.components[1]);
  }
  const Poly& b0 = square ? a0 : b0_store;
  const Poly& b1 = square ? a1 : b1_store;

  Poly e0(kk * n), e1(kk * n), e2(kk * n);
  for (std::size_t i = 0; i < kk; ++i) {
    const Modulus& q = s.qp[i];
    for (std::size_t x = i * n; x < (i + 1) * n; ++x) {
      e0[x] = q.mul(a0[x], b0[x]);
      e1[x] = square ? q.add(q.mul(a0[x], a1[x]), q.mul(a0[x], a1[x])) : q.add(q.mul(a0[x], b1[x]), q.mul(a1[x], b0[x]));
      e2[x] = q.mul(a1[x], b1[x]);
    }
  }

  // round(t e / Q) in base P, then back to base Q.
  const auto scale = [&](Poly& e) {
    for (std::size_t i = 0; i < kk; ++i) s.ntt(i).inverse(e.data() + i * n);
    Poly yp(m * n);
    for (std::size_t c = 0; c < n; ++c) {
      u128 f = 0;
      for (std::size_t i = 0; i < k; ++i) f += static_cast<u128>(e[i * n + c]) * s.theta[i];
      const u64 r = static_cast<u64>(f >> 64) + (static_cast<u64>(f) >> 63);
      for (std::size_t j = 0; j < m; ++j) {
        const Modulus& p = s.ps[j];
        u128 acc = r;
        for (std::size_t i = 0; i < k; ++i) acc += static_cast<u128>(e[i * n + c]) * s.omega[i][j];
        const u64 v = p.reduce128(acc);
        yp[j * n + c] = p.add(v, s.gamma[j].mul(e[(k + j) * n + c], p.value()));
      }
    }
    Poly out(k * n);
    s.p_to_q.convert(yp.data(), out.data(), n);
    return out;
  };
  Poly r0 = scale(e0);
  Poly r1 = scale(e1);
  const Poly r2 = scale(e2);

  // Relinearise: digit d is the residue of r2 mod q_d, lifted to every prime.
  Poly acc0(k * n, 0), acc1(k * n, 0);
  Poly digit(n);
  for (std::size_t d = 0; d < k; ++d) {
    const u64* src = r2.data() + d * n;
    const Component& rk0 = rk.components[2 * d];
    const Component& rk1 = rk.components[2 * d + 1];
    for (std::size_t i = 0; i < k; ++i) {
      const Modulus& q = s.qs[i];
      for (std::size_t c = 0; c < n; ++c) digit[c] = q.reduce(src[c]);
      s.ntt(i).forward(digit.data());
      u64* o0 = acc0.data() + i * n;
      u64* o1 = acc1.data() + i * n;
      const u64* k0 = rk0.data() + i * n;
      const u64* k1 = rk1.data() + i * n;
      for (std::size_t c = 0; c < n; ++c) {
        o0[c] = q.add(o0[c], q.mul(digit[c], k0[c]));
        o1[c] = q.add(o1[c], q.mul(digit[c], k1[c]));
      }
    }
  }
  for (std::size_t i = 0; i < k; ++i) {
    const Modulus& q = s.qs[i];
    s.ntt(i).inverse(acc0.data() + i * n);
    s.ntt(i).inverse(acc1.data() + i * n);
    for (std::size_t x = i * n; x < (i + 1) * n; ++x) {
      r0[x] = q.add(r0[x], acc0[x]);
      r1[x] = q.add(r1[x], acc1[x]);
    }
  }

  Ciphertext out;
  out.backend = BackendKind::Rlwe;
  out.level = std::min(a.level, b.level) - 1;
  const double za = s.log_q - 1.0 - a.noise_budget;
  const double zb = s.log_q - 1.0 - b.noise_budget;
  out.noise_budget = s.log_q - 1.0 - product_noise_bits(za, zb);
  out.components = {std::move(r0), std::move(r1)};
  return out;
}

}  // namespace cdl::he
