"""Flat text config: one `dotted.key = value` per line, `#` comments.

Values coerce to int, float, or bool when they parse as one; anything else
stays a string. Section helpers slice the flat dict for the model, train,
and data builders.
"""

import re

from .errors import ConfigError
from .model import StageConfig, get_config

_KEY_RE = re.compile(r"^[a-z_][a-z0-9_.\[\]-]*$")

_MODEL_KEYS = {
    "name", "family", "size", "input", "classes", "n_filters",
    "mlp_ratio", "drop_path", "routeing_ratio",
}
_STAGE_KEYS = {"depth", "width", "mixer"}
_TRAIN_KEYS = {
    "lr", "weight_decay", "beta1", "beta2", "eps", "epochs",
    "warmup_epochs", "batch_size", "label_smoothing", "min_lr",
    "warmup_floor",
}
_DATA_KEYS = {"grid", "classes", "noise", "train_per_class", "test_per_class"}
_STAGE_SECTION_RE = re.compile(r"^stages\[([0-3])\]$")


def _check_key(key):
    """Return an error string for an unknown key, or None."""
    head, _, rest = key.partition(".")
    stage = _STAGE_SECTION_RE.match(head)
    if stage:
        allowed, where = _STAGE_KEYS, head
    elif head == "model":
        allowed, where = _MODEL_KEYS, "model"
    elif head == "train":
        allowed, where = _TRAIN_KEYS, "train"
    elif head == "data":
        allowed, where = _DATA_KEYS, "data"
    else:
        return "unknown section %r" % head
    if rest not in allowed:
        return "unknown key %r in section %s" % (rest, where)
    return None


def coerce(text):
    low = text.lower()
    if low == "true":
        return True
    if low == "false":
        return False
    try:
        return int(text, 0)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def parse_config_text(text, source="<config>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                "%s:%d: expected 'key = value', got %r" % (source, lineno, raw)
            )
        key, val = (part.strip() for part in line.split("=", 1))
        if not _KEY_RE.match(key):
            raise ConfigError("%s:%d: bad key %r" % (source, lineno, key))
        if not val:
            raise ConfigError("%s:%d: empty value for %r" % (source, lineno, key))
        if key in out:
            raise ConfigError("%s:%d: duplicate key %r" % (source, lineno, key))
        why = _check_key(key)
        if why:
            raise ConfigError("%s:%d: %s" % (source, lineno, why))
        out[key] = coerce(val)
    return out


def load_config(path):
    with open(path, "r", encoding="utf-8") as f:
        return parse_config_text(f.read(), source=str(path))


def section(flat, prefix):
    """Keys under `prefix.`, with the prefix stripped."""
    head = prefix + "."
    return {k[len(head):]: v for k, v in flat.items() if k.startswith(head)}


def model_config_from(flat):
    """Build a ModelConfig from `model.*` and optional `stages[i].*` keys."""
    m = section(flat, "model")
    for key in m:
        if key not in _MODEL_KEYS:
            raise ConfigError("unknown key model.%s" % key)
    if "name" in m:
        name = str(m["name"])
    elif "family" in m and "size" in m:
        name = "%s-%s" % (m["family"], m["size"])
    else:
        raise ConfigError("config needs model.name or model.family + model.size")
    cfg = get_config(
        name,
        input_size=m.get("input"),
        num_classes=m.get("classes"),
        n_filters=m.get("n_filters", 4),
        drop_path=m.get("drop_path"),
    )
    if "mlp_ratio" in m:
        cfg.mlp_ratio = int(m["mlp_ratio"])
    if "routeing_ratio" in m:
        cfg.routeing_ratio = float(m["routeing_ratio"])
    for i in range(4):
        over = section(flat, "stages[%d]" % i)
        for key in over:
            if key not in _STAGE_KEYS:
                raise ConfigError("unknown key stages[%d].%s" % (i, key))
        if over:
            st = cfg.stages[i]
            cfg.stages[i] = StageConfig(
                over.get("depth", st.depth),
                over.get("width", st.width),
                over.get("mixer", st.mixer),
                st.down_kernel, st.down_stride, st.down_pad, st.res_scale,
            )
    return cfg
