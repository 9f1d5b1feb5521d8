"""Append-only hash-chained ledger and the energy-aware validator lottery.

Canonical byte layout (all integers big-endian, variable-length fields
length-prefixed) hashed with SHA-256:

    transaction := kind:u8  subject:i64  payload_len:u32  payload  round:i64
    block preimage := height:i64  prev_hash:32B  timestamp:i64
                      validator:i64  tx_count:u32  transaction...

Genesis sits at height 0 with an all-zero prev_hash and validator -1. The
NDJSON export writes one block object per line with `prev_hash`, `hash`, and
transaction payloads hex-encoded; import round-trips the bytes exactly.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np

from .trust import DomainError, EnergyState

HASH_BYTES = 32
ZERO_HASH = bytes(HASH_BYTES)
GENESIS_VALIDATOR = -1
PROB_TOL = 1e-9


class NoCandidates(Exception):
    """Validator selection was asked to choose from an empty entry list."""


class EmptyBlockRejected(Exception):
    """Blocks after genesis must carry at least one transaction."""


class LedgerFormatError(ValueError):
    """An NDJSON ledger line did not match the documented schema."""


class TxKind(Enum):
    TRUST_UPDATE = "TrustUpdate"
    MODEL_DIGEST = "ModelDigest"
    INTERACTION_BATCH_DIGEST = "InteractionBatchDigest"


_KIND_CODE = {
    TxKind.TRUST_UPDATE: 1,
    TxKind.MODEL_DIGEST: 2,
    TxKind.INTERACTION_BATCH_DIGEST: 3,
}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


@dataclass(frozen=True)
class Transaction:
    kind: TxKind
    subject: int
    payload: bytes
    round: int

    def __post_init__(self):
        if len(self.payload) == 0:
            raise DomainError("transaction payload must be non-empty")
        if self.round < 0:
            raise DomainError(f"round={self.round!r} negative")

    def encode(self) -> bytes:
        return (
            struct.pack(">BqI", _KIND_CODE[self.kind], self.subject, len(self.payload))
            + self.payload
            + struct.pack(">q", self.round)
        )


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: int
    validator: int
    transactions: tuple[Transaction, ...]
    hash: bytes


def block_digest(
    height: int,
    prev_hash: bytes,
    timestamp: int,
    validator: int,
    transactions: Sequence[Transaction],
) -> bytes:
    preimage = struct.pack(
        ">q32sqqI", height, prev_hash, timestamp, validator, len(transactions)
    )
    h = hashlib.sha256(preimage)
    for tx in transactions:
        h.update(tx.encode())
    return h.digest()


def _make_block(
    height: int,
    prev_hash: bytes,
    timestamp: int,
    validator: int,
    transactions: Sequence[Transaction],
) -> Block:
    txs = tuple(transactions)
    return Block(
        height=height,
        prev_hash=prev_hash,
        timestamp=timestamp,
        validator=validator,
        transactions=txs,
        hash=block_digest(height, prev_hash, timestamp, validator, txs),
    )


@dataclass
class Ledger:
    blocks: list[Block] = field(default_factory=list)

    @classmethod
    def with_genesis(cls, timestamp: int = 0) -> "Ledger":
        ledger = cls()
        ledger.blocks.append(
            _make_block(0, ZERO_HASH, timestamp, GENESIS_VALIDATOR, ())
        )
        return ledger

    def __len__(self) -> int:
        return len(self.blocks)

    @property
    def head(self) -> Block:
        return self.blocks[-1]

    def transaction_count(self) -> int:
        return sum(len(b.transactions) for b in self.blocks)


def append_block(
    ledger: Ledger,
    transactions: Sequence[Transaction],
    validator: int,
    round: int,
) -> Block:
    """Seal `transactions` into a new block chained onto `ledger`."""
    if not transactions:
        raise EmptyBlockRejected("refusing to append a block with no transactions")
    if not ledger.blocks:
        raise DomainError("ledger has no genesis block")
    prev = ledger.head
    block = _make_block(prev.height + 1, prev.hash, round, validator, transactions)
    ledger.blocks.append(block)
    return block


class ChainStatus(NamedTuple):
    valid: bool
    corrupt_height: int | None

    @classmethod
    def ok(cls) -> "ChainStatus":
        return cls(True, None)

    @classmethod
    def corrupt(cls, height: int) -> "ChainStatus":
        return cls(False, height)


def verify_chain(ledger: Ledger) -> ChainStatus:
    """Recompute every digest and prev-link; report the first failing height.

    Corruption is a return value, never an exception.
    """
    prev_hash = ZERO_HASH
    for k, block in enumerate(ledger.blocks):
        if block.height != k:
            return ChainStatus.corrupt(k)
        if block.prev_hash != prev_hash:
            return ChainStatus.corrupt(k)
        recomputed = block_digest(
            block.height,
            block.prev_hash,
            block.timestamp,
            block.validator,
            block.transactions,
        )
        if recomputed != block.hash:
            return ChainStatus.corrupt(k)
        prev_hash = block.hash
    return ChainStatus.ok()


# --- validator lottery -------------------------------------------------------


def validation_probabilities(entries: Sequence[tuple[float, float]]) -> list[float]:
    """Selection probability per entry, proportional to trust * energy.

    Falls back to the uniform distribution when every product is zero so the
    chain keeps making progress.
    """
    if not entries:
        raise NoCandidates("no lottery entries")
    products = []
    for trust, energy in entries:
        if not 0.0 <= trust <= 1.0:
            raise DomainError(f"trust={trust!r} outside [0, 1]")
        if not 0.0 <= energy <= 1.0:
            raise DomainError(f"energy={energy!r} outside [0, 1]")
        products.append(trust * energy)
    total = sum(products)
    if total <= 0.0:
        return [1.0 / len(entries)] * len(entries)
    return [p / total for p in products]


@dataclass(frozen=True)
class ValidatorLottery:
    """Candidate UAV ids with their lottery probabilities."""

    uav_ids: tuple[int, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        if len(self.uav_ids) != len(self.probabilities):
            raise DomainError("ids and probabilities differ in length")
        if abs(sum(self.probabilities) - 1.0) > PROB_TOL:
            raise DomainError("probabilities must sum to 1")
        if any(p < 0 for p in self.probabilities):
            raise DomainError("probabilities must be non-negative")

    @classmethod
    def from_entries(
        cls, entries: Sequence[tuple[int, float, float]]
    ) -> "ValidatorLottery":
        probs = validation_probabilities([(t, e) for _, t, e in entries])
        return cls(tuple(uav for uav, _, _ in entries), tuple(probs))


def select_validator(lottery: ValidatorLottery, rng: np.random.Generator) -> int:
    """Draw one UAV id; deterministic for a given generator state."""
    probs = np.asarray(lottery.probabilities, dtype=float)
    probs = probs / probs.sum()
    idx = rng.choice(len(probs), p=probs)
    return lottery.uav_ids[int(idx)]


def energy_charge(state: EnergyState, cost: float) -> tuple[EnergyState, float]:
    """Drain `cost` units, flooring at zero.

    Returns the new state and the amount actually drawn, which is what the
    metrics accounting must bill.
    """
    if cost < 0:
        raise DomainError(f"cost={cost!r} negative")
    drawn = min(cost, state.remaining)
    return EnergyState(state.remaining - drawn, state.capacity), drawn


# --- NDJSON export / import --------------------------------------------------


def block_to_dict(block: Block) -> dict:
    return {
        "height": block.height,
        "prev_hash": block.prev_hash.hex(),
        "timestamp": block.timestamp,
        "validator": block.validator,
        "transactions": [
            {
                "kind": tx.kind.value,
                "subject": tx.subject,
                "payload": tx.payload.hex(),
                "round": tx.round,
            }
            for tx in block.transactions
        ],
        "hash": block.hash.hex(),
    }


def to_ndjson(ledger: Ledger) -> str:
    lines = [
        json.dumps(block_to_dict(b), separators=(",", ":")) for b in ledger.blocks
    ]
    return "\n".join(lines) + "\n"


def _block_from_dict(obj: dict) -> Block:
    try:
        txs = tuple(
            Transaction(
                kind=TxKind(tx["kind"]),
                subject=int(tx["subject"]),
                payload=bytes.fromhex(tx["payload"]),
                round=int(tx["round"]),
            )
            for tx in obj["transactions"]
        )
        return Block(
            height=int(obj["height"]),
            prev_hash=bytes.fromhex(obj["prev_hash"]),
            timestamp=int(obj["timestamp"]),
            validator=int(obj["validator"]),
            transactions=txs,
            hash=bytes.fromhex(obj["hash"]),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise LedgerFormatError(f"malformed block record: {exc}") from exc


def from_ndjson(text: str) -> Ledger:
    """Parse an exported ledger; integrity is checked separately."""
    ledger = Ledger()
    for lineno, line in enumerate(text.splitlines()):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise LedgerFormatError(f"line {lineno + 1}: invalid JSON") from exc
        ledger.blocks.append(_block_from_dict(obj))
    return ledger
