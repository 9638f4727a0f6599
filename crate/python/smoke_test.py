#!/usr/bin/env python3
"""Smoke test for the webskill_py extension module.

Build the module first:

    cargo build -p webskill-py --release

then run this script from the repository root:

    python3 python/smoke_test.py
"""

import json
import shutil
import sys
import tempfile
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent


def import_module():
    """Copy the cdylib under an importable name and import it."""
    candidates = [
        REPO / "target" / "release" / "libwebskill_py.so",
        REPO / "target" / "debug" / "libwebskill_py.so",
        REPO / "target" / "release" / "libwebskill_py.dylib",
        REPO / "target" / "debug" / "libwebskill_py.dylib",
    ]
    built = next((p for p in candidates if p.exists()), None)
    if built is None:
        sys.exit("build the extension first: cargo build -p webskill-py --release")
    stage = Path(tempfile.mkdtemp(prefix="webskill_py_"))
    shutil.copy(built, stage / "webskill_py.so")
    sys.path.insert(0, str(stage))
    import webskill_py

    return webskill_py


def check(name, ok, detail=""):
    status = "ok" if ok else "FAIL"
    print(f"  {name}: {status}{(' — ' + detail) if detail else ''}")
    if not ok:
        sys.exit(1)


def main():
    ws = import_module()
    print(f"webskill_py {ws.__version__}")

    # DSL: parse -> canonical print -> parse is stable.
    src = 'impl abstract_shopping for shop0 { skill search(query: text) { click(#q); type(#q, query); press("Enter") } }'
    canonical = ws.parse_skill_text(src)
    check("dsl round trip", ws.parse_skill_text(canonical) == canonical)
    check("step counting", ws.count_statement_steps('call search("mug"); noop') == 2)

    # Site families are deterministic and share a capability manifest.
    fam = ws.SiteFamily.generate("shopping", 3, 42)
    check(
        "site family",
        fam.site_ids() == ["shopping0", "shopping1", "shopping2"]
        and "checkout" in fam.capabilities(),
    )
    fam2 = ws.SiteFamily.generate("shopping", 3, 42)
    check("family determinism", fam.to_json() == fam2.to_json())

    # The category blueprint is printable DSL.
    iface = ws.category_interface("shopping")
    check("interface schema", iface.startswith("interface abstract_shopping for shopping"))

    # A full deterministic learning run.
    # A holdout covering every (site, capability) pair keeps the
    # reusability series monotone as skills land.
    summary = ws.run_curriculum("shopping", 2, 16, 42, holdout=12)
    lib = summary.library
    check(
        "curriculum run",
        summary.accepted_proposals > 0 and lib.skill_count() > 2,
        repr(summary),
    )
    check("library is valid", lib.validate() == [])

    series = summary.series()
    reuse = [p.skill_reusability for p in series]
    steps = [p.mean_steps for p in series]
    check(
        "reusability non-decreasing",
        all(a <= b + 1e-12 for a, b in zip(reuse, reuse[1:])),
        f"{reuse[0]:.2f} -> {reuse[-1]:.2f}",
    )
    check(
        "mean steps non-increasing",
        all(a >= b - 1e-12 for a, b in zip(steps, steps[1:])),
        f"{steps[0]:.2f} -> {steps[-1]:.2f}",
    )

    # Resolution and expansion through the library.
    site = fam.site_ids()[0]
    skill_id, body = lib.resolve(site, "search")
    check("resolve concrete", skill_id.endswith(f"@{site}") and len(body.splitlines()) >= 2)
    expansion = lib.expand(site, 'call search("ceramic mug")')
    check("expand call", len(expansion) >= 2, " / ".join(expansion))

    # Save and reload the library directory.
    with tempfile.TemporaryDirectory() as d:
        lib.save(str(d) + "/library")
        loaded = ws.Library.load(str(d) + "/library")
        check(
            "library round trip",
            loaded.skill_ids() == lib.skill_ids() and loaded.validate() == [],
        )

    # Task-free exploration covers every signature on the site.
    explored = ws.explore("coding", 1, 4, 7, holdout=4)
    check(
        "exploration coverage",
        explored.accepted_proposals >= 4,
        repr(explored),
    )

    rows = json.loads(summary.metrics_json())
    check("metrics json", len(rows) == len(series) and "success_rate" in rows[0])

    print("smoke test passed")


if __name__ == "__main__":
    main()
