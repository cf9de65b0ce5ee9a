"""JSON schemas for experiment configs, problem manifests, results and calibration constants."""

from __future__ import annotations

import jsonschema

__all__ = [
    "CONFIG_SCHEMA",
    "MANIFEST_SCHEMA",
    "RESULT_SCHEMA",
    "CALIBRATION_SCHEMA",
    "ConfigError",
    "validate",
]

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_nonneg = {"type": "number", "minimum": 0}
_unit = {"type": "number", "minimum": 0, "maximum": 1}
_posint = {"type": "integer", "minimum": 1}
_nonnegint = {"type": "integer", "minimum": 0}
_num_or_null = {"type": ["number", "null"]}
_vector = {"type": "array", "items": _num}
_complex_vector = {
    "type": "object",
    "required": ["re", "im"],
    "properties": {"re": {"type": "array"}, "im": {"type": "array"}},
    "additionalProperties": False,
}
_array = {"anyOf": [{"type": "array"}, _complex_vector]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ExperimentConfig",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "signal": {"type": ["string", "null"]},
                "kernel": {"type": ["string", "null"]},
                "sigma_y": _nonneg,
                "data_range": _pos,
                "seed": _nonnegint,
                "benchmark": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "d": _posint,
                        "support": _posint,
                        "n_components": _posint,
                        "n_pieces": _posint,
                        "level_lo": _num,
                        "level_hi": _num,
                        "component_var": _pos,
                        "dirichlet_alpha": _pos,
                        "init_width": _pos,
                        "min_init_error": _nonneg,
                        "prior_seed": _nonnegint,
                    },
                },
                "kernel_support": {"type": "array", "items": _posint, "minItems": 1, "maxItems": 2},
                "kernel_width": _pos,
            },
        },
        "prior": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["gmm", "gaussian"]},
                "file": {"type": "string"},
                "mean": {"anyOf": [_num, _vector]},
                "variance": _pos,
            },
        },
        "schedule": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "T", "sigma_max"],
            "properties": {
                "kind": {"enum": ["linear", "geometric"]},
                "T": _posint,
                "sigma_min": _pos,
                "sigma_max": _pos,
            },
        },
        "pcgs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "N": _posint,
                "M": {
                    "anyOf": [
                        {"type": "array", "items": _nonnegint},
                        {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["t_switch", "m"],
                            "properties": {"t_switch": _nonnegint, "m": _nonnegint},
                        },
                    ]
                },
                "eta": _unit,
                "eta_b": _unit,
                "trace_granularity": {"enum": ["per_t", "per_inner"]},
                "blocked_phi_updates": _nonnegint,
                "langevin": {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "step_size": _pos,
                        "n_steps": _posint,
                        "noise_scale": {"enum": [0, 1, 0.0, 1.0]},
                        "prior": {
                            "type": "object",
                            "additionalProperties": False,
                            "required": ["kind"],
                            "properties": {"kind": {"enum": ["laplace", "gaussian", "flat"]}, "lam": _nonneg},
                        },
                        "project_simplex": {"type": "boolean"},
                        "projection": {"enum": ["step", "run"]},
                        "refresh_xhat": {"type": "boolean"},
                    },
                },
                "phi_init": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": ["prior", "fixed", "heuristic"]},
                        "phi0": _vector,
                        "name": {"type": "string"},
                        "options": {"type": "object"},
                    },
                },
            },
        },
        "mode": {"enum": ["gibbsddrm", "ddrm", "blocked"]},
        "output_dir": {"type": "string"},
        "seeds": {"type": "array", "items": _nonnegint, "minItems": 1},
        "n_chains": _posint,
    },
}

MANIFEST_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ProblemManifest",
    "type": "object",
    "required": ["format_version", "seed", "sigma_y", "data_range", "signal_shape", "kernel_shape", "files"],
    "additionalProperties": False,
    "properties": {
        "format_version": {"const": 1},
        "seed": _nonnegint,
        "sigma_y": _nonneg,
        "data_range": _pos,
        "signal_shape": {"type": "array", "items": _posint, "minItems": 1, "maxItems": 2},
        "kernel_shape": {"type": "array", "items": _posint, "minItems": 1, "maxItems": 2},
        "kernel_origin": {"type": "array", "items": _nonnegint},
        "init_kernel_width": _pos,
        "files": {
            "type": "object",
            "required": ["signal", "kernel", "measurement"],
            "additionalProperties": {"type": "string"},
        },
        "prior": {"type": ["object", "null"]},
        "config": {"type": "object"},
    },
}

_metrics = {
    "type": "object",
    "properties": {
        "mse": _nonneg,
        "psnr_db": _num_or_null,
        "psnr_infinite": {"type": "boolean"},
        "psnr_aligned_db": _num_or_null,
        "kernel_error_l2_normalized": _nonneg,
        "kernel_shift": {"type": "array", "items": {"type": "integer"}},
        "data_range": _pos,
    },
}

RESULT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "RestorationResult",
    "type": "object",
    "required": ["status", "seed", "x0_estimate", "phi_estimate", "metrics", "counters", "trace", "events",
                 "config", "error"],
    "additionalProperties": False,
    "properties": {
        "status": {"enum": ["ok", "error"]},
        "seed": {"type": ["integer", "null"]},
        "x0_estimate": {"anyOf": [_array, {"type": "null"}]},
        "phi_estimate": {"anyOf": [_array, {"type": "null"}]},
        "metrics": _metrics,
        "counters": {
            "type": "object",
            "required": ["denoiser_evals", "phi_updates"],
            "properties": {"denoiser_evals": _nonnegint, "phi_updates": _nonnegint},
        },
        "trace": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "residual", "denoiser_evals"],
                "properties": {
                    "t": _nonnegint,
                    "residual": _num_or_null,
                    "denoiser_evals": _nonnegint,
                    "phi": _array,
                    "cycle": _posint,
                    "m": _nonnegint,
                    "K": _nonnegint,
                    "phi_updates": _nonnegint,
                },
            },
        },
        "events": {
            "type": "array",
            "items": {
                "type": "array",
                "prefixItems": [{"enum": ["x", "phi"]}, _nonnegint, _nonnegint],
                "minItems": 3,
                "maxItems": 3,
            },
        },
        "config": {"type": "object"},
        "error": {
            "anyOf": [
                {"type": "null"},
                {"type": "object", "required": ["message", "step"],
                 "properties": {"message": {"type": "string"}, "step": {"type": "object"}}},
            ]
        },
        "timing": {"type": "object"},
    },
}

CALIBRATION_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "CalibrationConstants",
    "type": "object",
    "required": ["step_size", "n_steps", "laplace_lam", "t_switch", "m_inner", "n_chains",
                 "ddrm_mse_band", "kernel_threshold", "recipe"],
    "properties": {
        "step_size": _pos,
        "n_steps": _posint,
        "laplace_lam": _pos,
        "t_switch": _nonnegint,
        "m_inner": _nonnegint,
        "n_cycles": _posint,
        "n_chains": _posint,
        "projection": {"enum": ["step", "run"]},
        "eta": _unit,
        "eta_b": _unit,
        "nonblind_eta": _unit,
        "nonblind_eta_b": _unit,
        "ddrm_mse_band": _pos,
        "kernel_threshold": _pos,
        "recipe": {"type": "object"},
    },
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is a dotted path to the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def validate(doc, schema) -> None:
    """Raise ``ConfigError`` naming the first offending field."""
    validator = jsonschema.Draft202012Validator(schema)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = ".".join(str(p) for p in err.absolute_path) or "<root>"
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            if extra:
                path = ".".join([p for p in [path if path != "<root>" else ""] if p] + [extra[0]])
        raise ConfigError(path, err.message)
