"""Binary checkpoint format.

Layout (all integers little-endian):

    magic      8 bytes   b"HSWCKPT\\0"
    version    u32
    obs_dim    u32
    policy     4 x u32   layer widths
    value      4 x u32   layer widths
    sections   u32       number of sections that follow
    per section:
        name_len u16, name (utf-8), count u64, count x float64 ('<f8')

Sections are written in this order: ``policy`` and ``value`` (parameters
flattened in ``NetworkSpec.param_shapes`` order), then ``scaler``,
``trainer``, ``policy_optimizer``, ``value_optimizer``. Reading back yields
bit-identical arrays.
"""

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from utils.errors import CheckpointError
from utils.policy.network import NetworkSpec, flatten_params, unflatten_params

logger = logging.getLogger(__name__)

MAGIC = b"HSWCKPT\0"
VERSION = 1
SECTION_ORDER = ("policy", "value", "scaler", "trainer", "policy_optimizer", "value_optimizer")

_HEADER = struct.Struct("<8sII4I4II")


@dataclass
class Checkpoint:
    policy_spec: NetworkSpec
    value_spec: NetworkSpec
    policy_params: dict
    value_params: dict
    # scaler / trainer / optimizer state as flat float64 arrays
    extra: dict = field(default_factory=dict)


def _pack_section(name, values):
    encoded = name.encode("utf-8")
    values = np.ascontiguousarray(values, dtype="<f8")
    return struct.pack("<H", len(encoded)) + encoded + struct.pack("<Q", values.size) + values.tobytes()


def checkpoint_bytes(checkpoint):
    p, v = checkpoint.policy_spec, checkpoint.value_spec
    if p.obs_dim != v.obs_dim:
        raise CheckpointError("policy and value networks disagree on the observation size")
    sections = {
        "policy": flatten_params(checkpoint.policy_params, p),
        "value": flatten_params(checkpoint.value_params, v),
    }
    for name in SECTION_ORDER[2:]:
        if name in checkpoint.extra:
            sections[name] = np.asarray(checkpoint.extra[name], dtype=np.float64).ravel()
    body = b"".join(_pack_section(name, values) for name, values in sections.items())
    header = _HEADER.pack(MAGIC, VERSION, p.obs_dim, *p.widths, *v.widths, len(sections))
    return header + body


def save_checkpoint(path, checkpoint):
    logger.debug("save_checkpoint() called with path: %s", path)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = checkpoint_bytes(checkpoint)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
    return path


def _read_header(data, source):
    if len(data) < _HEADER.size:
        raise CheckpointError(f"{source}: file too short to be a checkpoint")
    magic, version, obs_dim, *rest = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint file (bad magic)")
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {version} (expected {VERSION})")
    policy_widths, value_widths, n_sections = tuple(rest[0:4]), tuple(rest[4:8]), rest[8]
    return obs_dim, policy_widths, value_widths, n_sections


def _read_sections(data, offset, n_sections, source):
    sections = {}
    try:
        for _ in range(n_sections):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (count,) = struct.unpack_from("<Q", data, offset)
            offset += 8
            end = offset + 8 * count
            if end > len(data):
                raise CheckpointError(f"{source}: section '{name}' is truncated")
            sections[name] = np.frombuffer(data, dtype="<f8", count=count, offset=offset).astype(np.float64)
            offset = end
    except struct.error as e:
        raise CheckpointError(f"{source}: truncated section table ({e})")
    if offset != len(data):
        raise CheckpointError(f"{source}: {len(data) - offset} trailing bytes after the last section")
    return sections


def checkpoint_from_bytes(data, source="<bytes>"):
    obs_dim, policy_widths, value_widths, n_sections = _read_header(data, source)
    policy_spec = NetworkSpec(obs_dim=obs_dim, widths=policy_widths, log_std=True)
    value_spec = NetworkSpec(obs_dim=obs_dim, widths=value_widths, log_std=False)
    sections = _read_sections(data, _HEADER.size, n_sections, source)
    for name, spec in (("policy", policy_spec), ("value", value_spec)):
        if name not in sections:
            raise CheckpointError(f"{source}: missing '{name}' section")
        if sections[name].size != spec.n_params:
            raise CheckpointError(
                f"{source}: '{name}' section has {sections[name].size} values, widths {spec.widths} need {spec.n_params}"
            )
    return Checkpoint(
        policy_spec=policy_spec,
        value_spec=value_spec,
        policy_params=unflatten_params(sections.pop("policy"), policy_spec),
        value_params=unflatten_params(sections.pop("value"), value_spec),
        extra=sections,
    )


# Load and, when given, check the network shapes against the expected ones
def load_checkpoint(path, expected_policy_spec=None, expected_value_spec=None):
    logger.debug("load_checkpoint() called with path: %s", path)
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    checkpoint = checkpoint_from_bytes(path.read_bytes(), source=str(path))
    for label, expected, actual in (
        ("policy", expected_policy_spec, checkpoint.policy_spec),
        ("value", expected_value_spec, checkpoint.value_spec),
    ):
        if expected is not None and expected != actual:
            raise CheckpointError(
                f"{path}: {label} network mismatch, checkpoint has obs_dim={actual.obs_dim} widths={actual.widths}, "
                f"expected obs_dim={expected.obs_dim} widths={expected.widths}"
            )
    return checkpoint


# Header summary for `cli export-checkpoint-info` and the dashboard
def checkpoint_info(path):
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    data = path.read_bytes()
    obs_dim, policy_widths, value_widths, n_sections = _read_header(data, str(path))
    sections = _read_sections(data, _HEADER.size, n_sections, str(path))
    info = {
        "path": str(path),
        "version": VERSION,
        "obs_dim": obs_dim,
        "policy_widths": list(policy_widths),
        "value_widths": list(value_widths),
        "sections": {name: int(values.size) for name, values in sections.items()},
        "sha256": hashlib.sha256(data).hexdigest(),
    }
    trainer = sections.get("trainer")
    if trainer is not None and trainer.size >= 4:
        info["update"] = int(trainer[0])
        info["policy_lr"] = float(trainer[1])
        info["value_lr"] = float(trainer[2])
        info["clip_epsilon"] = float(trainer[3])
    return info
