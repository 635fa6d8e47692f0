"""JSON Schemas for everything the CLI writes.

The ``schema`` field of each document names its version; bump it whenever a
field changes meaning.
"""

SAMPLES_SCHEMA_ID = "spreadnuts/samples/v1"
BENCH_SCHEMA_ID = "spreadnuts/bench-report/v1"
ISLANDS_SCHEMA_ID = "spreadnuts/islands-report/v1"

_nullable_number = {"type": ["number", "null"]}

MIXTURE = {
    "type": "object",
    "required": ["dimension", "components"],
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "components": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["weight", "mean", "covariance"],
                "properties": {
                    "weight": {"type": "number", "minimum": 0},
                    "mean": {"type": "array", "items": {"type": "number"}},
                    "covariance": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
                },
            },
        },
    },
}

GRID = {
    "type": "object",
    "required": ["dimension", "cell_width", "lower", "upper"],
    "properties": {
        "dimension": {"type": "integer", "minimum": 1},
        "cell_width": {"type": "number", "exclusiveMinimum": 0},
        "lower": {"type": "number"},
        "upper": {"type": "number"},
    },
}

SAMPLER_OUTCOME = {
    "type": "object",
    "required": ["name", "m_tv", "n_retained", "failed", "error"],
    "properties": {
        "name": {"type": "string"},
        "m_tv": {"anyOf": [{"type": "number", "minimum": 0, "maximum": 1}, {"type": "null"}]},
        "n_retained": {"type": "integer", "minimum": 0},
        "failed": {"type": "boolean"},
        "error": {"type": ["string", "null"]},
        "step_size": _nullable_number,
        "mean_leapfrog": _nullable_number,
        "mean_accept": _nullable_number,
        "n_divergent": {"type": "integer", "minimum": 0},
        "occupancy": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "duration_s": {"type": "number", "minimum": 0},
    },
}

TRIAL_REPORT = {
    "type": "object",
    "required": ["seed", "n_samples", "burn_in", "grid", "mixture", "baseline_m_tv", "samplers", "log_ratios"],
    "properties": {
        "seed": {},
        "n_samples": {"type": "integer", "minimum": 1},
        "burn_in": {"type": "integer", "minimum": 0},
        "grid": GRID,
        "mixture": MIXTURE,
        "baseline_m_tv": {"type": "number", "minimum": 0, "maximum": 1},
        "samplers": {"type": "array", "items": SAMPLER_OUTCOME},
        "log_ratios": {"type": "object", "additionalProperties": _nullable_number},
    },
}

BENCH_REPORT = {
    "type": "object",
    "required": ["schema", "config", "trials", "summary", "failed"],
    "properties": {
        "schema": {"const": BENCH_SCHEMA_ID},
        "config": {"type": "object"},
        "failed": {"type": "boolean"},
        "trials": {
            "type": "array",
            "items": {
                "allOf": [
                    TRIAL_REPORT,
                    {
                        "type": "object",
                        "required": ["trial_index", "dimension", "n_components"],
                        "properties": {
                            "trial_index": {"type": "integer", "minimum": 0},
                            "dimension": {"type": "integer", "minimum": 1},
                            "n_components": {"type": "integer", "minimum": 1},
                        },
                    },
                ]
            },
        },
        "summary": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["dimension", "n_trials", "mean_m_tv", "mean_log_ratio"],
                "properties": {
                    "dimension": {"type": "integer"},
                    "n_trials": {"type": "integer"},
                    "mean_m_tv": {"type": "object", "additionalProperties": _nullable_number},
                    "mean_log_ratio": {"type": "object", "additionalProperties": _nullable_number},
                },
            },
        },
    },
}

ISLANDS_REPORT = {
    "type": "object",
    "required": ["schema", "config", "reports", "failed"],
    "properties": {
        "schema": {"const": ISLANDS_SCHEMA_ID},
        "config": {"type": "object"},
        "failed": {"type": "boolean"},
        "reports": {
            "type": "array",
            "items": {
                "allOf": [
                    TRIAL_REPORT,
                    {
                        "type": "object",
                        "required": ["mu_magnitude", "repetition", "mu", "modes"],
                        "properties": {
                            "mu_magnitude": {"type": "number", "exclusiveMinimum": 0},
                            "repetition": {"type": "integer", "minimum": 0},
                            "mu": {"type": "array", "items": {"type": "number"}},
                            "modes": {"type": "array"},
                        },
                    },
                ]
            },
        },
    },
}

SAMPLES = {
    "type": "object",
    "required": ["schema", "config", "samples", "diagnostics"],
    "properties": {
        "schema": {"const": SAMPLES_SCHEMA_ID},
        "config": {"type": "object"},
        "samples": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "diagnostics": {"type": "object"},
    },
}
