#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <gmpxx.h>

#include "pushsum/extended.hpp"
#include "pushsum/rng.hpp"

namespace pushsum::paillier {

using BigInt = mpz_class;

/// Big-endian magnitude bytes of a non-negative integer (empty for zero).
std::vector<std::uint8_t> to_bytes(const BigInt& v);
BigInt from_bytes(std::span<const std::uint8_t> bytes);

/// Uniform integer in [0, bound).
BigInt random_below(const BigInt& bound, Rng& rng);

/// Miller-Rabin with `rounds` random bases, after trial division by small
/// primes.
bool is_probable_prime(const BigInt& n, int rounds, Rng& rng);

/// Random prime with exactly `bits` bits and its top two bits set, so a
/// product of two such primes has exactly 2*bits bits.
BigInt random_prime(unsigned bits, Rng& rng);

inline constexpr int kMillerRabinRounds = 64;

/// Public key (n, g) with g = n + 1.
class PublicKey {
 public:
  explicit PublicKey(BigInt n);

  const BigInt& n() const { return n_; }
  const BigInt& n_squared() const { return n_squared_; }
  BigInt g() const { return n_ + 1; }
  std::size_t bits() const { return mpz_sizeinbase(n_.get_mpz_t(), 2); }
  /// Short fingerprint of n, carried by ciphertexts.
  std::uint64_t id() const { return id_; }

  /// 4-byte big-endian length followed by the big-endian bytes of n.
  std::vector<std::uint8_t> serialize() const;
  /// Inverse of serialize(); `consumed` receives the number of bytes read.
  static PublicKey deserialize(std::span<const std::uint8_t> bytes,
                               std::size_t* consumed = nullptr);

  friend bool operator==(const PublicKey& a, const PublicKey& b) { return a.n_ == b.n_; }

 private:
  BigInt n_;
  BigInt n_squared_;
  std::uint64_t id_;
};

/// Public key plus the private key (lambda, mu).
class Keypair {
 public:
  const PublicKey& public_key() const { return public_; }
  const BigInt& lambda() const { return lambda_; }
  const BigInt& mu() const { return mu_; }
  const BigInt& p() const { return p_; }
  const BigInt& q() const { return q_; }

  friend Keypair keypair_from_primes(const BigInt& p, const BigInt& q);

 private:
  Keypair(PublicKey pub, BigInt lambda, BigInt mu, BigInt p, BigInt q)
      : public_(std::move(pub)), lambda_(std::move(lambda)), mu_(std::move(mu)),
        p_(std::move(p)), q_(std::move(q)) {}

  PublicKey public_;
  BigInt lambda_;
  BigInt mu_;
  BigInt p_;
  BigInt q_;
};

/// n = pq, g = n + 1, lambda = (p-1)(q-1), mu = lambda^{-1} mod n.
/// Throws kInvalidConfig unless p, q are distinct primes of equal bit length
/// with gcd(n, lambda) = 1.
Keypair keypair_from_primes(const BigInt& p, const BigInt& q);

/// Fresh key with an n of exactly `bit_length` bits (>= 16).
Keypair keygen(unsigned bit_length, Rng& rng);

struct Ciphertext {
  BigInt value;
  std::uint64_t key_id = 0;

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

/// c = g^m r^n mod n^2 with r drawn uniformly from Z_n^*.
/// Throws kPlaintextOutOfRange unless 0 <= m < n.
Ciphertext encrypt(const PublicKey& key, const BigInt& m, Rng& rng);

/// Encryption with a caller-chosen nonce r (must lie in Z_n^*).
Ciphertext encrypt_with_nonce(const PublicKey& key, const BigInt& m, const BigInt& r);

/// m = L(c^lambda mod n^2) mu mod n with L(u) = (u - 1)/n.
/// Throws kMalformedCiphertext when c is out of range, shares a factor with
/// n, or was produced under another key.
BigInt decrypt(const Keypair& key, const Ciphertext& c);

/// Homomorphic addition: D(add(E(a), E(b))) = a + b mod n.
Ciphertext add(const PublicKey& key, const Ciphertext& a, const Ciphertext& b);

/// Signed fixed-point embedding of reals into Z_n: v -> round(v 2^f), with
/// negatives stored as n - |round(v 2^f)|. Decoding treats values above n/2
/// as negative. Magnitudes must stay below 2^(bits(n) - 2 - f).
class FixedPointCodec {
 public:
  explicit FixedPointCodec(BigInt modulus, unsigned fractional_bits = 32);

  unsigned fractional_bits() const { return fractional_bits_; }
  const BigInt& modulus() const { return modulus_; }
  /// Exclusive bound on |v|.
  double max_magnitude() const { return max_magnitude_; }

  /// Throws kMagnitudeOverflow when |v| >= max_magnitude().
  BigInt encode(const Extended& v) const;
  Extended decode(const BigInt& e) const;

  /// The value encode(v) stands for: v rounded to the 2^-f grid.
  Extended quantize(const Extended& v) const { return decode(encode(v)); }

 private:
  BigInt modulus_;
  BigInt half_;
  unsigned fractional_bits_;
  double max_magnitude_;
};

}  // namespace pushsum::paillier
