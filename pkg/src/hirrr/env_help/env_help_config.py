"""Environment variable documentation shown by the env-help command."""

ENV_CATEGORIES = {
    "runtime": {
        "title": "⚙️ Runtime Configuration",
        "description": "Worker pool, seeding and output location",
        "variables": {
            "HIRRR_THREADS": {
                "description": "Worker threads for grid cells and replicates (--threads wins)",
                "default": "1",
                "example": "8",
                "required": False,
            },
            "HIRRR_SEED": {
                "description": "Run seed when --seed is not given",
                "default": "0",
                "example": "2024",
                "required": False,
            },
            "DEFAULT_OUTPUT_DIR": {
                "description": "Output directory when --out is omitted",
                "default": "./hirrr_output",
                "example": "./runs",
                "required": False,
            },
        },
    },
    "estimation": {
        "title": "📐 Estimation Defaults",
        "description": "Iteration limits and replicate aggregation",
        "variables": {
            "HIRRR_MAX_ITERS": {
                "description": "Iteration cap for block coordinate descent",
                "default": "5000",
                "example": "20000",
                "required": False,
            },
            "HIRRR_TOLERANCE": {
                "description": "Relative objective-change stopping tolerance",
                "default": "1e-6",
                "example": "1e-9",
                "required": False,
            },
            "HIRRR_TRIM": {
                "description": "Fraction trimmed from each tail of replicate metrics",
                "default": "0.10",
                "example": "0.05",
                "required": False,
            },
        },
    },
    "logging": {
        "title": "📝 Logging Configuration",
        "description": "Application and audit logging",
        "variables": {
            "LOG_LEVEL": {
                "description": "Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)",
                "default": "INFO",
                "example": "DEBUG",
                "required": False,
            },
            "LOG_FILE": {
                "description": "Application log file path",
                "default": "./logs/hirrr.log",
                "example": "/var/log/hirrr.log",
                "required": False,
            },
            "ENABLE_AUDIT_LOGGING": {
                "description": "Record runs and fits in the audit log",
                "default": "true",
                "example": "false",
                "required": False,
            },
            "AUDIT_LOG_FILE": {
                "description": "Audit log file path",
                "default": "./logs/hirrr_audit.log",
                "example": "/var/log/hirrr_audit.log",
                "required": "If audit logging enabled",
            },
        },
    },
}

ENV_HELP_CATEGORY_CHOICES = tuple(ENV_CATEGORIES.keys()) + ("all",)

# Column widths for the env-help table
ENV_HELP_DESCRIPTION_MAX_LENGTH = 40
ENV_HELP_DEFAULT_MAX_LENGTH = 20
