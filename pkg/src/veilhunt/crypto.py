"""Cryptographic primitives consumed by the concealment protocols.

Blind signatures are textbook RSA blinding over full-domain-hashed tokens;
the set-union ring uses a commutative exponentiation cipher over a shared
prime; reports travel to the trusted node in RSA-KEM + AES-GCM envelopes.
All randomness comes from caller-supplied seeded RNGs so runs replay
bit-identically.  512-bit keys reproduce the reference timing regime and are
NOT secure for production use.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass

import gmpy2
from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .model import GatewayId

KEY_BITS_CHOICES = (512, 1024, 2048)

_NONCE_LEN = 12


class CryptoError(Exception):
    pass


class EnvelopeError(CryptoError):
    """Authenticated decryption failed (wrong key or corrupted payload)."""


# ---------------------------------------------------------------------------
# Hashing
# ---------------------------------------------------------------------------


def digest_int(data: bytes) -> int:
    """The predefined hash h: SHA-256 of canonical bytes as an integer."""
    return int.from_bytes(hashlib.sha256(data).digest(), "big")


def digest_mod(data: bytes, modulus: int) -> int:
    """Full-domain hash into [1, modulus): h reduced into the key's group.

    Rehashes with a counter in the (negligible-probability) event the
    reduction lands on 0.
    """
    counter = 0
    while True:
        h = hashlib.sha256(data)
        if counter:
            h.update(counter.to_bytes(4, "big"))
        value = int.from_bytes(h.digest(), "big") % modulus
        if value != 0:
            return value
        counter += 1


def int_digest(value: int) -> int:
    """h applied to a protocol integer (signatures, intersection elements)."""
    length = max(1, (value.bit_length() + 7) // 8)
    return digest_int(value.to_bytes(length, "big"))


# ---------------------------------------------------------------------------
# Prime generation (seeded)
# ---------------------------------------------------------------------------


def find_prime(bits: int, rng: random.Random) -> int:
    """Random prime with the top bit set, drawn from the given RNG stream."""
    while True:
        candidate = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if gmpy2.is_prime(candidate):
            return candidate


# ---------------------------------------------------------------------------
# Blind signatures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlindPublicKey:
    modulus: int
    pub_exp: int


@dataclass(frozen=True)
class BlindKeypair:
    """RSA pair: public exponent for blinding/verification, private for signing."""

    modulus: int
    pub_exp: int
    priv_exp: int
    bits: int

    def public(self) -> BlindPublicKey:
        return BlindPublicKey(self.modulus, self.pub_exp)


def generate_blind_keypair(bits: int, rng: random.Random) -> BlindKeypair:
    if bits not in KEY_BITS_CHOICES:
        raise CryptoError(f"key size must be one of {KEY_BITS_CHOICES}, got {bits}")
    e = 65537
    while True:
        p = find_prime(bits // 2, rng)
        q = find_prime(bits // 2, rng)
        if p == q:
            continue
        lam = math.lcm(p - 1, q - 1)
        if math.gcd(e, lam) != 1:
            continue
        return BlindKeypair(p * q, e, pow(e, -1, lam), bits)


@dataclass(frozen=True)
class BlindingFactor:
    r: int
    r_inv: int


def make_blinding_factor(modulus: int, rng: random.Random) -> BlindingFactor:
    """Fresh unit r with its inverse; non-invertible draws are discarded."""
    while True:
        r = rng.randrange(2, modulus)
        if math.gcd(r, modulus) == 1:
            return BlindingFactor(r, pow(r, -1, modulus))


def blind(m: int, key: BlindPublicKey, factor: BlindingFactor) -> int:
    """Hide a hashed value before requesting a signature: m * r^e mod N."""
    if not 0 < m < key.modulus:
        raise CryptoError("value to blind must lie in (0, modulus)")
    return (m * pow(factor.r, key.pub_exp, key.modulus)) % key.modulus


def sign_value(x: int, key: BlindKeypair) -> int:
    """Apply the private exponent: x^u mod N."""
    if not 0 < x < key.modulus:
        raise CryptoError("value to sign must lie in (0, modulus)")
    return pow(x, key.priv_exp, key.modulus)


def unblind(s: int, factor: BlindingFactor, modulus: int) -> int:
    """Strip the blinding factor: s * r^-1 mod N == sign(m)."""
    return (s * factor.r_inv) % modulus


# ---------------------------------------------------------------------------
# Commutative cipher (shared-prime exponentiation)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CommutativeKey:
    prime: int
    exponent: int
    inverse: int


def generate_shared_prime(bits: int, rng: random.Random) -> int:
    return find_prime(bits, rng)


def generate_comm_key(prime: int, rng: random.Random) -> CommutativeKey:
    """Exponent coprime to p-1, so x -> x^k mod p permutes the group."""
    order = prime - 1
    while True:
        k = rng.randrange(3, order)
        if math.gcd(k, order) == 1:
            return CommutativeKey(prime, k, pow(k, -1, order))


def comm_encrypt(x: int, key: CommutativeKey) -> int:
    if not 0 < x < key.prime:
        raise CryptoError("plaintext outside the cipher group")
    return pow(x, key.exponent, key.prime)


def comm_decrypt(y: int, key: CommutativeKey) -> int:
    if not 0 < y < key.prime:
        raise CryptoError("ciphertext outside the cipher group")
    return pow(y, key.inverse, key.prime)


def hash_to_group(data: bytes, prime: int) -> int:
    """Map canonical bytes to a cipher-group element in [2, prime-1)."""
    counter = 0
    while True:
        h = hashlib.sha256(b"grp" + data)
        if counter:
            h.update(counter.to_bytes(4, "big"))
        value = int.from_bytes(h.digest(), "big") % prime
        if value >= 2:
            return value
        counter += 1


# ---------------------------------------------------------------------------
# Public-key envelopes (RSA-KEM + AES-GCM)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Envelope:
    recipient: GatewayId
    ciphertext: bytes


def _kem_key(z: int, modulus: int) -> bytes:
    return hashlib.sha256(b"kem" + z.to_bytes((modulus.bit_length() + 7) // 8, "big")).digest()


def envelope_seal(
    payload: bytes, recipient: GatewayId, key: BlindPublicKey, rng: random.Random
) -> Envelope:
    """Seal bytes so only the holder of the matching private key can open them."""
    n_len = (key.modulus.bit_length() + 7) // 8
    z = rng.randrange(2, key.modulus)
    wrapped = pow(z, key.pub_exp, key.modulus).to_bytes(n_len, "big")
    nonce = rng.getrandbits(_NONCE_LEN * 8).to_bytes(_NONCE_LEN, "big")
    sealed = AESGCM(_kem_key(z, key.modulus)).encrypt(nonce, payload, None)
    return Envelope(recipient, wrapped + nonce + sealed)


def envelope_open(env: Envelope, key: BlindKeypair) -> bytes:
    n_len = (key.modulus.bit_length() + 7) // 8
    if len(env.ciphertext) < n_len + _NONCE_LEN:
        raise EnvelopeError("ciphertext too short")
    wrapped = int.from_bytes(env.ciphertext[:n_len], "big")
    nonce = env.ciphertext[n_len : n_len + _NONCE_LEN]
    sealed = env.ciphertext[n_len + _NONCE_LEN :]
    if not 0 < wrapped < key.modulus:
        raise EnvelopeError("wrapped key outside the recipient's modulus")
    z = pow(wrapped, key.priv_exp, key.modulus)
    try:
        return AESGCM(_kem_key(z, key.modulus)).decrypt(nonce, sealed, None)
    except InvalidTag as exc:
        raise EnvelopeError("authenticated decryption failed") from exc
