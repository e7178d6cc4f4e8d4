import logging

logger = logging.getLogger('Invariants')


class InvariantViolation(RuntimeError):
    """A mathematical invariant failed during a computation"""


def check(condition: bool, message: str):
    """Raise InvariantViolation with message unless condition holds"""
    if not condition:
        logger.error(f"Invariant violated: {message}")
        raise InvariantViolation(message)
