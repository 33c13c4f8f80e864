#include "pushsum/paillier.hpp"

#include <array>
#include <cmath>
#include <string>

#include "pushsum/errors.hpp"

namespace pushsum::paillier {
namespace {

constexpr std::array<unsigned, 53> kSmallPrimes = {
    2,   3,   5,   7,   11,  13,  17,  19,  23,  29,  31,  37,  41,  43,
    47,  53,  59,  61,  67,  71,  73,  79,  83,  89,  97,  101, 103, 107,
    109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181,
    191, 193, 197, 199, 211, 223, 227, 229, 233, 239, 241};

std::size_t bit_length(const BigInt& v) {
  return v == 0 ? 0 : mpz_sizeinbase(v.get_mpz_t(), 2);
}

BigInt random_bits(std::size_t bits, Rng& rng) {
  std::vector<std::uint64_t> words((bits + 63) / 64);
  for (auto& w : words) w = rng.next_u64();
  BigInt v;
  // Least significant word first, native endianness within words.
  mpz_import(v.get_mpz_t(), words.size(), -1, sizeof(std::uint64_t), 0, 0,
             words.data());
  const std::size_t excess = words.size() * 64 - bits;
  if (excess > 0) mpz_fdiv_r_2exp(v.get_mpz_t(), v.get_mpz_t(), bits);
  return v;
}

BigInt powm(const BigInt& base, const BigInt& exp, const BigInt& mod) {
  BigInt r;
  mpz_powm(r.get_mpz_t(), base.get_mpz_t(), exp.get_mpz_t(), mod.get_mpz_t());
  return r;
}

BigInt gcd(const BigInt& a, const BigInt& b) {
  BigInt r;
  mpz_gcd(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

}  // namespace

std::vector<std::uint8_t> to_bytes(const BigInt& v) {
  if (v < 0) throw Error(ErrorCode::kInvalidConfig, "cannot serialize negative integer");
  std::vector<std::uint8_t> out((bit_length(v) + 7) / 8);
  if (out.empty()) return out;
  std::size_t count = 0;
  mpz_export(out.data(), &count, 1, 1, 1, 0, v.get_mpz_t());
  out.resize(count);
  return out;
}

BigInt from_bytes(std::span<const std::uint8_t> bytes) {
  BigInt v;
  if (!bytes.empty()) mpz_import(v.get_mpz_t(), bytes.size(), 1, 1, 1, 0, bytes.data());
  return v;
}

BigInt random_below(const BigInt& bound, Rng& rng) {
  if (bound <= 0) throw Error(ErrorCode::kInvalidConfig, "random_below needs a positive bound");
  const std::size_t bits = bit_length(bound);
  for (;;) {
    BigInt v = random_bits(bits, rng);
    if (v < bound) return v;
  }
}

bool is_probable_prime(const BigInt& n, int rounds, Rng& rng) {
  if (n < 2) return false;
  for (unsigned p : kSmallPrimes) {
    if (n == p) return true;
    if (mpz_divisible_ui_p(n.get_mpz_t(), p)) return false;
  }
  BigInt d = n - 1;
  unsigned s = 0;
  while (mpz_even_p(d.get_mpz_t())) {
    d >>= 1;
    ++s;
  }
  const BigInt n_minus_1 = n - 1;
  const BigInt base_span = n - 3;  // bases drawn from [2, n-2]
  for (int r = 0; r < rounds; ++r) {
    const BigInt a = random_below(base_span, rng) + 2;
    BigInt x = powm(a, d, n);
    if (x == 1 || x == n_minus_1) continue;
    bool witness = true;
    for (unsigned i = 1; i < s; ++i) {
      x = x * x % n;
      if (x == n_minus_1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

BigInt random_prime(unsigned bits, Rng& rng) {
  if (bits < 3) throw Error(ErrorCode::kInvalidConfig, "prime size must be at least 3 bits");
  for (;;) {
    BigInt c = random_bits(bits, rng);
    mpz_setbit(c.get_mpz_t(), bits - 1);
    mpz_setbit(c.get_mpz_t(), bits - 2);
    mpz_setbit(c.get_mpz_t(), 0);
    if (is_probable_prime(c, kMillerRabinRounds, rng)) return c;
  }
}

PublicKey::PublicKey(BigInt n) : n_(std::move(n)), n_squared_(n_ * n_) {
  if (n_ < 3) throw Error(ErrorCode::kInvalidConfig, "Paillier modulus too small");
  id_ = static_cast<std::uint64_t>(mpz_getlimbn(n_.get_mpz_t(), 0)) ^
        (static_cast<std::uint64_t>(bits()) << 56);
}

std::vector<std::uint8_t> PublicKey::serialize() const {
  const std::vector<std::uint8_t> body = to_bytes(n_);
  std::vector<std::uint8_t> out;
  out.reserve(body.size() + 4);
  const auto len = static_cast<std::uint32_t>(body.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(len >> shift));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

PublicKey PublicKey::deserialize(std::span<const std::uint8_t> bytes, std::size_t* consumed) {
  if (bytes.size() < 4) throw Error(ErrorCode::kMalformedFrame, "public key truncated");
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len = (len << 8) | bytes[i];
  if (bytes.size() < 4 + static_cast<std::size_t>(len)) {
    throw Error(ErrorCode::kMalformedFrame, "public key body truncated");
  }
  if (consumed != nullptr) *consumed = 4 + len;
  return PublicKey(from_bytes(bytes.subspan(4, len)));
}

Keypair keypair_from_primes(const BigInt& p, const BigInt& q) {
  Rng check_rng(0x5EED);
  if (p == q || bit_length(p) != bit_length(q) ||
      !is_probable_prime(p, kMillerRabinRounds, check_rng) ||
      !is_probable_prime(q, kMillerRabinRounds, check_rng)) {
    throw Error(ErrorCode::kInvalidConfig,
                "Paillier needs two distinct primes of equal bit length");
  }
  BigInt n = p * q;
  BigInt lambda = (p - 1) * (q - 1);
  if (gcd(n, lambda) != 1) {
    throw Error(ErrorCode::kInvalidConfig, "gcd(n, lambda) != 1");
  }
  BigInt mu;
  mpz_invert(mu.get_mpz_t(), lambda.get_mpz_t(), n.get_mpz_t());
  return Keypair(PublicKey(std::move(n)), std::move(lambda), std::move(mu), p, q);
}

Keypair keygen(unsigned bit_length_n, Rng& rng) {
  if (bit_length_n < 16) {
    throw Error(ErrorCode::kInvalidConfig,
                "key size " + std::to_string(bit_length_n) + " below 16 bits");
  }
  const unsigned p_bits = bit_length_n / 2;
  const unsigned q_bits = bit_length_n - p_bits;
  for (;;) {
    BigInt p = random_prime(p_bits, rng);
    BigInt q = random_prime(q_bits, rng);
    if (p == q || bit_length(p) != bit_length(q)) continue;
    if (gcd(p * q, (p - 1) * (q - 1)) != 1) continue;
    return keypair_from_primes(p, q);
  }
}

Ciphertext encrypt_with_nonce(const PublicKey& key, const BigInt& m, const BigInt& r) {
  if (m < 0 || m >= key.n()) {
    throw Error(ErrorCode::kPlaintextOutOfRange, "plaintext outside [0, n)");
  }
  if (r <= 0 || r >= key.n() || gcd(r, key.n()) != 1) {
    throw Error(ErrorCode::kPlaintextOutOfRange, "nonce outside Z_n^*");
  }
  // With g = n + 1, g^m = 1 + m n (mod n^2).
  const BigInt gm = (1 + m * key.n()) % key.n_squared();
  const BigInt rn = powm(r, key.n(), key.n_squared());
  return {gm * rn % key.n_squared(), key.id()};
}

Ciphertext encrypt(const PublicKey& key, const BigInt& m, Rng& rng) {
  if (m < 0 || m >= key.n()) {
    throw Error(ErrorCode::kPlaintextOutOfRange, "plaintext outside [0, n)");
  }
  for (;;) {
    BigInt r = random_below(key.n(), rng);
    if (r != 0 && gcd(r, key.n()) == 1) return encrypt_with_nonce(key, m, r);
  }
}

BigInt decrypt(const Keypair& key, const Ciphertext& c) {
  const PublicKey& pub = key.public_key();
  if (c.key_id != pub.id()) {
    throw Error(ErrorCode::kMalformedCiphertext, "ciphertext was produced under another key");
  }
  if (c.value <= 0 || c.value >= pub.n_squared() || gcd(c.value, pub.n()) != 1) {
    throw Error(ErrorCode::kMalformedCiphertext, "ciphertext outside Z*_{n^2}");
  }
  const BigInt u = powm(c.value, key.lambda(), pub.n_squared());
  BigInt l = (u - 1) / pub.n();
  BigInt m = l * key.mu() % pub.n();
  return m;
}

Ciphertext add(const PublicKey& key, const Ciphertext& a, const Ciphertext& b) {
  if (a.key_id != key.id() || b.key_id != key.id()) {
    throw Error(ErrorCode::kMalformedCiphertext, "operands under different keys");
  }
  return {a.value * b.value % key.n_squared(), key.id()};
}

FixedPointCodec::FixedPointCodec(BigInt modulus, unsigned fractional_bits)
    : modulus_(std::move(modulus)), half_(modulus_ / 2), fractional_bits_(fractional_bits) {
  const long headroom = static_cast<long>(bit_length(modulus_)) - 2 -
                        static_cast<long>(fractional_bits_);
  if (headroom < 1) {
    throw Error(ErrorCode::kInvalidConfig,
                "modulus too small for " + std::to_string(fractional_bits_) +
                    " fractional bits");
  }
  max_magnitude_ = std::ldexp(1.0, static_cast<int>(headroom));
}

BigInt FixedPointCodec::encode(const Extended& v) const {
  if (!std::isfinite(v.hi) || !(std::abs(v.to_double()) < max_magnitude_)) {
    throw Error(ErrorCode::kMagnitudeOverflow,
                "|" + std::to_string(v.to_double()) + "| exceeds codec bound");
  }
  const int f = static_cast<int>(fractional_bits_);
  // Scaling by 2^f is exact; split each part into integer and fraction.
  const double hi = std::ldexp(v.hi, f);
  const double lo = std::ldexp(v.lo, f);
  const double hi_int = std::floor(hi);
  const double lo_int = std::floor(lo);
  const double frac = (hi - hi_int) + (lo - lo_int);  // in [0, 2)
  BigInt x(hi_int);
  x += BigInt(lo_int);
  x += static_cast<long>(std::floor(frac + 0.5));
  if (x < 0) x += modulus_;
  return x;
}

Extended FixedPointCodec::decode(const BigInt& e) const {
  BigInt x = e;
  if (x > half_) x -= modulus_;
  const double hi = x.get_d();
  const BigInt rest = x - BigInt(hi);
  const double lo = rest.get_d();
  const int f = static_cast<int>(fractional_bits_);
  return Extended(std::ldexp(hi, -f), 0.0) + Extended(std::ldexp(lo, -f));
}

}  // namespace pushsum::paillier
