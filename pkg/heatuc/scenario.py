import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import compact
from .bidding import build_bid_book
from .loader import load_case, load_profile, with_profile
from .market import run_sequential
from .models import BidBook, ComparisonReport, RunResult
from .oracle import enumerate_oracle
from .report import build_run_result, emit_comparison, write_results
from .schemas import Case, ScenarioConfig
from .uc import solve_aware, solve_decoupled_uc

logger = logging.getLogger(__name__)


@dataclass
class ScenarioOutcome:
    case: Case
    results: list[RunResult]
    comparison: Optional[ComparisonReport] = None
    artifacts: list[Path] = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return all(r.optimal for r in self.results)

    def result(self, model: str) -> RunResult:
        for r in self.results:
            if r.model == model:
                return r
        raise KeyError(model)


def run_clear(case: Case, bids: BidBook) -> RunResult:
    plan = compact.all_on_plan(case)
    seq = run_sequential(case, plan, bids)
    result = build_run_result(case, "clear", plan, seq, objective=0.0)
    return result.model_copy(update={"objective": result.total("overall")})


def run_decoupled(case: Case, bids: BidBook, config: ScenarioConfig) -> RunResult:
    sol = solve_decoupled_uc(case, bids, gap=config.gap, time_limit=config.time_limit)
    seq = run_sequential(case, sol.plan, bids)
    return build_run_result(case, "decoupled", sol.plan, seq, sol.objective, sol.gap, sol.optimal)


def run_aware(case: Case, bids: BidBook, config: ScenarioConfig) -> RunResult:
    sol = solve_aware(case, bids, gamma=config.gamma, big_m=config.big_m, gap=config.gap,
                      time_limit=config.time_limit, export_lp=config.export_lp)
    return build_run_result(case, "aware", sol.plan, sol.sequential, sol.objective, sol.gap, sol.optimal)


def run_oracle(case: Case, bids: BidBook, config: ScenarioConfig) -> RunResult:
    res = enumerate_oracle(case, bids, gamma=config.gamma, validity_filter=config.validity_filter)
    seq = res.sequential if res.sequential is not None else run_sequential(case, res.plan, bids)
    return build_run_result(case, "oracle", res.plan, seq, res.objective)


def run_scenario(config: ScenarioConfig) -> ScenarioOutcome:
    """Load the case, run the selected model(s) and write every table to `config.out_dir`."""
    case = load_case(config.case_path)
    if config.profile_path is not None:
        case = with_profile(case, load_profile(config.profile_path))
    bids = build_bid_book(case)

    outcome = ScenarioOutcome(case=case, results=[])
    if config.model == "clear":
        outcome.results.append(run_clear(case, bids))
    elif config.model == "decoupled":
        outcome.results.append(run_decoupled(case, bids, config))
    elif config.model == "aware":
        outcome.results.append(run_aware(case, bids, config))
    elif config.model == "oracle":
        outcome.results.append(run_oracle(case, bids, config))
    else:
        # sequentially, for reproducibility
        decoupled = run_decoupled(case, bids, config)
        aware = run_aware(case, bids, config)
        outcome.results += [decoupled, aware]
        outcome.comparison = emit_comparison(decoupled, aware)

    outcome.artifacts = write_results(case, outcome.results, config.out_dir, outcome.comparison)
    for r in outcome.results:
        logger.info("%s: overall cost %.2f, curtailment %.2f%%, %d invalid heat bids",
                    r.model, r.total("overall"), r.sequential.curtailment_percent, len(r.validity.violations))
    return outcome
