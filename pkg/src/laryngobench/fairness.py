"""Fairness battery: is correctness associated with sex or age?"""

from __future__ import annotations

import numpy as np

from laryngobench.stats import fisher_exact, t_test


def _not_computable(reason: str) -> dict:
    return {"computable": False, "reason": reason}


def _age_summary(ages: np.ndarray) -> dict:
    if ages.size == 0:
        return {"n": 0}
    return {"n": int(ages.size), "mean": float(ages.mean()), "sd": float(ages.std(ddof=1)) if ages.size > 1 else 0.0,
            "median": float(np.median(ages)), "min": float(ages.min()), "max": float(ages.max())}


def fairness_battery(sex, age, labels_true, labels_pred, supplementary: bool = False) -> dict:
    """Fisher exact on sex x {correct, incorrect}; Welch t-test on ages of correct vs incorrect.

    ``sex`` holds "Male"/"Female" strings.  The table rows are (Male, Female)
    and the columns (correct, incorrect).
    """
    sex = np.asarray(sex)
    age = np.asarray(age, dtype=float)
    correct = np.asarray(labels_true) == np.asarray(labels_pred)
    if not (sex.size == age.size == correct.size):
        raise ValueError("sex, age and predictions must be aligned")
    male = sex == "Male"
    table = [[int((male & correct).sum()), int((male & ~correct).sum())],
             [int((~male & correct).sum()), int((~male & ~correct).sum())]]
    report: dict = {"n": int(correct.size), "n_correct": int(correct.sum()),
                    "table": {"rows": ["Male", "Female"], "columns": ["correct", "incorrect"], "counts": table},
                    "age_summary": {"correct": _age_summary(age[correct]), "incorrect": _age_summary(age[~correct])}}
    if correct.all() or not correct.any():
        reason = "all predictions correct" if correct.all() else "all predictions incorrect"
        report["sex_fisher"] = _not_computable(reason)
        report["age_t_test"] = _not_computable(reason)
    else:
        report["sex_fisher"] = fisher_exact(table).to_dict()
        if correct.sum() < 2 or (~correct).sum() < 2:
            report["age_t_test"] = _not_computable("fewer than two patients in a correctness group")
        else:
            report["age_t_test"] = t_test(age[correct], age[~correct]).to_dict()
    if supplementary:
        report["supplementary"] = {
            "rows": [{"sex": str(s), "age": float(a), "correct": bool(c)} for s, a, c in zip(sex, age, correct)],
        }
    return report
