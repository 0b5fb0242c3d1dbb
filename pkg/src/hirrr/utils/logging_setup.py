"""Logging configuration for the application."""

import logging
import logging.handlers
from pathlib import Path
from typing import Any, Dict, List, Optional


def setup_logging(
    log_file: str,
    log_level: str = "INFO",
    max_bytes: int = 10_000_000,
    backup_count: int = 5,
):
    """
    Set up application logging with file rotation and console output.

    Args:
        log_file: Path to the log file
        log_level: Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
        max_bytes: Maximum log file size before rotation
        backup_count: Number of backup files to keep
    """
    log_path = Path(log_file)
    log_path.parent.mkdir(parents=True, exist_ok=True)

    formatter = logging.Formatter(
        fmt="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )

    file_handler = logging.handlers.RotatingFileHandler(
        log_file, maxBytes=max_bytes, backupCount=backup_count
    )
    file_handler.setFormatter(formatter)
    file_handler.setLevel(getattr(logging, log_level.upper()))

    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)
    console_handler.setLevel(logging.WARNING)

    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, log_level.upper()))

    # Remove existing handlers to avoid duplicates
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    root_logger.addHandler(file_handler)
    root_logger.addHandler(console_handler)

    logging.getLogger("hirrr").setLevel(getattr(logging, log_level.upper()))
    logging.getLogger("faker").setLevel(logging.WARNING)


class AuditLogger:
    """Audit trail of CLI runs and the fits they perform."""

    def __init__(self, audit_log_file: str):
        """
        Initialize audit logger.

        Args:
            audit_log_file: Path to audit log file
        """
        self.logger = logging.getLogger("hirrr.audit")
        self.logger.setLevel(logging.INFO)
        self.logger.propagate = False

        audit_path = Path(audit_log_file)
        audit_path.parent.mkdir(parents=True, exist_ok=True)

        audit_formatter = logging.Formatter(
            fmt="%(asctime)s - AUDIT - %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
        )

        resolved = str(audit_path.resolve())
        for handler in self.logger.handlers[:]:
            if getattr(handler, "baseFilename", None) == resolved:
                return

        audit_handler = logging.handlers.RotatingFileHandler(
            audit_log_file,
            maxBytes=50_000_000,  # 50MB
            backupCount=10,
        )
        audit_handler.setFormatter(audit_formatter)
        self.logger.addHandler(audit_handler)

    def log_run_start(self, command: str, seed: int, config_hash: str):
        """Log start of a CLI command."""
        self.logger.info(
            f"RUN_START - Command: {command} - Seed: {seed} - Config: {config_hash}"
        )

    def log_run_complete(self, command: str, outputs: List[str], elapsed: float):
        """Log completion of a CLI command."""
        self.logger.info(
            f"RUN_COMPLETE - Command: {command} - Outputs: {len(outputs)} - Time: {elapsed:.2f}s"
        )

    def log_fit(
        self,
        estimator: str,
        rank: int,
        lam: float,
        iterations: int,
        converged: bool,
        objective: Optional[float] = None,
    ):
        """Log a single model fit."""
        objective_info = f" - Objective: {objective:.6g}" if objective is not None else ""
        self.logger.info(
            f"FIT - Estimator: {estimator} - Rank: {rank} - Lambda: {lam} - Iterations: {iterations} - Converged: {converged}{objective_info}"
        )

    def log_run_error(self, command: str, error_message: str):
        """Log a failed CLI command."""
        self.logger.error(f"RUN_ERROR - Command: {command} - Error: {error_message}")

    def log_summary(self, command: str, summary: Dict[str, Any]):
        """Log a key/value summary of a command's results."""
        self.logger.info(f"RUN_SUMMARY - Command: {command} - {summary}")
