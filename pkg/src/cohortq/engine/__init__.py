from .plan import QueryPlan, build_plan, can_skip
from .evaluate import EvalContext, ResultLine, evaluate_bucket, evaluate_entity
from .worker import execute_on_worker

__all__ = [
    "QueryPlan",
    "build_plan",
    "can_skip",
    "EvalContext",
    "ResultLine",
    "evaluate_bucket",
    "evaluate_entity",
    "execute_on_worker",
]
