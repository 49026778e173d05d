"""Smoke test for the tripgrade extension: generate, check, score, evaluate."""

import os
import sys
import tempfile

import tripgrade as tg


def main() -> int:
    with tempfile.TemporaryDirectory() as root:
        n = tg.generate_fixture(root, seed=7, days=3, count=3)
        sandbox = tg.Sandbox.load(os.path.join(root, "sandbox"))
        with open(os.path.join(root, "queries.jsonl")) as f:
            query = tg.Query.from_json(f.readline())
        with open(os.path.join(root, "gold", query.id + ".txt")) as f:
            plan = tg.Plan.parse(f.read())

        report = tg.check_plan(plan, query, sandbox)
        assert report.all_passed, report.failed()
        scores = tg.score_plan(plan, query, sandbox, gold=plan)
        print(scores)

        broken = tg.perturb(plan, "budget_bust", sandbox, amount=3.0)
        assert "Budget" in tg.check_plan(broken, query, sandbox).failed()

        j = lambda *p: os.path.join(root, *p)
        rates = tg.evaluate(j("sandbox"), j("queries.jsonl"), j("gold"), j("out"), gold=j("gold"))
        assert rates["all"]["final_pass_rate"] == 1.0, rates
        print(f"ok: {n} queries, rates {rates['all']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
