#include <gtest/gtest.h>

#include <set>

#include "pushsum/errors.hpp"
#include "pushsum/paillier.hpp"
#include "pushsum/sim.hpp"

namespace pushsum::paillier {
namespace {

// Brute-force inverse, independent of mpz_invert.
BigInt brute_inverse(const BigInt& a, const BigInt& n) {
  for (BigInt x = 1; x < n; ++x) {
    if ((a * x) % n == 1) return x;
  }
  return 0;
}

BigInt powm(const BigInt& b, const BigInt& e, const BigInt& m) {
  BigInt r;
  mpz_powm(r.get_mpz_t(), b.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
  return r;
}

const Keypair& test_key() {
  static const Keypair key = [] {
    Rng rng(2024);
    return keygen(128, rng);
  }();
  return key;
}

TEST(Paillier, ToyKeyParameters) {
  const Keypair k = keypair_from_primes(5, 7);
  EXPECT_EQ(k.public_key().n(), 35);
  EXPECT_EQ(k.public_key().g(), 36);
  EXPECT_EQ(k.lambda(), 24);
  EXPECT_EQ(k.mu(), brute_inverse(24, 35));
  EXPECT_EQ(k.mu(), 19);
}

TEST(Paillier, ToyEncryptionMatchesFormula) {
  const Keypair k = keypair_from_primes(5, 7);
  const Ciphertext c = encrypt_with_nonce(k.public_key(), 3, 2);
  const BigInt expected = (powm(36, 3, 1225) * powm(2, 35, 1225)) % 1225;
  EXPECT_EQ(c.value, expected);
  EXPECT_EQ(decrypt(k, c), 3);
}

TEST(Paillier, ToyKeyExhaustiveRoundTrip) {
  const Keypair k = keypair_from_primes(5, 7);
  for (int m = 0; m < 35; ++m) {
    for (int r : {1, 2, 3, 4, 6, 8, 34}) {
      EXPECT_EQ(decrypt(k, encrypt_with_nonce(k.public_key(), m, r)), m);
    }
  }
}

TEST(Paillier, RejectsBadPrimes) {
  EXPECT_THROW(keypair_from_primes(7, 7), Error);
  EXPECT_THROW(keypair_from_primes(5, 9), Error);
  EXPECT_THROW(keypair_from_primes(5, 11), Error);
}

TEST(Paillier, KeygenHasExactBitLength) {
  for (unsigned bits : {16u, 64u, 128u, 256u}) {
    Rng rng(bits);
    const Keypair k = keygen(bits, rng);
    EXPECT_EQ(k.public_key().bits(), bits);
    EXPECT_EQ(k.p() * k.q(), k.public_key().n());
  }
}

TEST(Paillier, RandomRoundTrip) {
  const Keypair& k = test_key();
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const BigInt m = random_below(k.public_key().n(), rng);
    EXPECT_EQ(decrypt(k, encrypt(k.public_key(), m, rng)), m);
  }
}

TEST(Paillier, EncryptionIsRandomised) {
  const Keypair& k = test_key();
  Rng rng(6);
  std::set<std::string> seen;
  for (int i = 0; i < 10000; ++i) {
    seen.insert(encrypt(k.public_key(), 1, rng).value.get_str(16));
  }
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(Paillier, AdditiveHomomorphism) {
  const Keypair& k = test_key();
  const BigInt& n = k.public_key().n();
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const BigInt a = random_below(n, rng);
    const BigInt b = random_below(n, rng);
    const Ciphertext sum =
        add(k.public_key(), encrypt(k.public_key(), a, rng), encrypt(k.public_key(), b, rng));
    EXPECT_EQ(decrypt(k, sum), BigInt((a + b) % n));
  }
}

TEST(Paillier, PlaintextRange) {
  const Keypair& k = test_key();
  Rng rng(8);
  try {
    encrypt(k.public_key(), k.public_key().n(), rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPlaintextOutOfRange);
  }
  EXPECT_THROW(encrypt(k.public_key(), -1, rng), Error);
}

TEST(Paillier, MalformedCiphertexts) {
  const Keypair& k = test_key();
  Rng rng(9);
  Ciphertext c = encrypt(k.public_key(), 5, rng);
  Ciphertext big = c;
  big.value = k.public_key().n_squared();
  EXPECT_THROW(decrypt(k, big), Error);
  Ciphertext shares_factor = c;
  shares_factor.value = k.p();
  EXPECT_THROW(decrypt(k, shares_factor), Error);

  Rng other_rng(10);
  const Keypair other = keygen(128, other_rng);
  try {
    decrypt(other, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedCiphertext);
  }
}

TEST(Paillier, PublicKeySerialisation) {
  const PublicKey& pk = test_key().public_key();
  const auto bytes = pk.serialize();
  std::size_t used = 0;
  const PublicKey back = PublicKey::deserialize(bytes, &used);
  EXPECT_EQ(back, pk);
  EXPECT_EQ(back.id(), pk.id());
  EXPECT_EQ(used, bytes.size());
  EXPECT_EQ(from_bytes(to_bytes(pk.n())), pk.n());
  EXPECT_TRUE(to_bytes(0).empty());
}

TEST(Paillier, PrimalityAgreesWithTrialDivision) {
  Rng rng(11);
  for (unsigned v = 2; v < 3000; ++v) {
    bool prime = true;
    for (unsigned d = 2; d * d <= v; ++d) prime = prime && (v % d != 0);
    EXPECT_EQ(is_probable_prime(v, 20, rng), prime) << v;
  }
  // Carmichael numbers.
  for (unsigned v : {561u, 1105u, 1729u, 2465u, 2821u, 6601u, 8911u}) {
    EXPECT_FALSE(is_probable_prime(v, 20, rng));
  }
}

TEST(FixedPoint, NegativeEncoding) {
  const Keypair& k = test_key();
  const FixedPointCodec codec(k.public_key().n(), 32);
  EXPECT_EQ(codec.encode(Extended(-1.5)), BigInt(k.public_key().n() - BigInt("6442450944")));
  EXPECT_EQ(codec.encode(Extended(1.5)), BigInt("6442450944"));
  EXPECT_EQ(codec.decode(codec.encode(Extended(-1.5))), Extended(-1.5));
  EXPECT_EQ(codec.encode(Extended(0.0)), 0);
}

TEST(FixedPoint, QuantisationError) {
  const FixedPointCodec codec(test_key().public_key().n(), 32);
  Rng rng(12);
  const double half_ulp = std::ldexp(1.0, -33);
  for (int i = 0; i < 2000; ++i) {
    const Extended v(rng.uniform(-1e6, 1e6), rng.uniform(-1e-12, 1e-12));
    const Extended q = codec.quantize(v);
    EXPECT_LE(std::abs((q - v).to_double()), half_ulp * (1 + 1e-9));
  }
}

TEST(FixedPoint, MagnitudeOverflow) {
  Rng rng(13);
  const Keypair small = keygen(48, rng);
  const FixedPointCodec codec(small.public_key().n(), 32);
  EXPECT_LE(codec.max_magnitude(), std::ldexp(1.0, 48 - 2 - 32));
  try {
    codec.encode(Extended(codec.max_magnitude()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMagnitudeOverflow);
  }
  EXPECT_NO_THROW(codec.encode(Extended(codec.max_magnitude() / 2)));
}

TEST(FixedPoint, HomomorphicSumOfSignedValues) {
  const Keypair& k = test_key();
  const FixedPointCodec codec(k.public_key().n(), 32);
  Rng rng(14);
  const double a = -123.25, b = 40.5;
  const Ciphertext c = add(k.public_key(), encrypt(k.public_key(), codec.encode(a), rng),
                           encrypt(k.public_key(), codec.encode(b), rng));
  EXPECT_EQ(codec.decode(decrypt(k, c)).to_double(), a + b);
}

TEST(Paillier, NodeKeypairIsDeterministic) {
  const Keypair a = node_keypair(3, 1, 64);
  const Keypair b = node_keypair(3, 1, 64);
  const Keypair c = node_keypair(3, 2, 64);
  EXPECT_EQ(a.public_key(), b.public_key());
  EXPECT_FALSE(a.public_key() == c.public_key());
}

}  // namespace
}  // namespace pushsum::paillier
