# run_demo.py
"""
One-shot demo of the phase-field toolkit on coarse grids.

Behavior:
- Loads environment from .env (PHASEFIELD_OUTPUT_DIR picks the output directory)
- Tabulates u_theta for the theta-scan temperatures
- Runs a small kappa sweep at theta = 0.7, the sign-symmetry experiment and an
  eigenfunction fiber-map scan
- Writes JSON to <output dir>/demo/demo_summary.json; a failing step is logged and
  recorded in the summary instead of aborting the demo
"""

import json
import logging
import os
from typing import Any, Dict

import numpy as np
from dotenv import load_dotenv

load_dotenv()

logger = logging.getLogger(__name__)
logging.basicConfig(level=logging.INFO)

from agents.diagnostics_agent import DiagnosticsAgent, s_phi_bound
from agents.record_store import RecordStore, json_safe, write_manifest, write_records_csv
from agents.sweep_agent import THETA_SCAN, SweepAgent, monotonicity_verdict
from tools.flory_huggins import PotentialParams, find_u_theta_report
from tools.grid import GridGeometry, eigenfunction

# coarse numerics: every kappa below stays under h^2/(4 kappa)
DEMO_NUMERICS = {"N": 32, "dt": 5e-3, "t_max": 2000.0}
DEMO_KAPPAS = (0.02, 0.10, 0.20, 0.25, 0.35)


def main():
    out_dir = os.path.join(os.getenv("PHASEFIELD_OUTPUT_DIR") or "data/outputs", "demo")
    os.makedirs(out_dir, exist_ok=True)
    summary: Dict[str, Any] = {"numerics": DEMO_NUMERICS}

    # ------------- u_theta -------------
    summary["u_theta"] = [find_u_theta_report(PotentialParams(t))._asdict() for t in THETA_SCAN.thetas]
    logger.info("u_theta: %s", [(r["root"], r["iterations"]) for r in summary["u_theta"]])

    agent = SweepAgent(numerics=DEMO_NUMERICS, near_threshold_factor=1.0,
                       store=RecordStore(os.path.join(out_dir, "records.json")))

    # ------------- kappa sweep -------------
    try:
        records = agent.sweep_grid([0.7], DEMO_KAPPAS, [1])
        write_records_csv(records, os.path.join(out_dir, "demo_records.csv"))
        write_manifest(os.path.join(out_dir, "demo_manifest.json"), DEMO_NUMERICS, records)
        summary["sweep"] = [r.to_row() for r in records]
        summary["monotonicity"] = monotonicity_verdict(r for r in records if r.kappa < 0.3)
    except Exception as e:
        logger.exception("Demo sweep failed: %s", e)
        summary["sweep"] = {"error": str(e)}

    # ------------- symmetry -------------
    try:
        pos, neg, mismatch = agent.symmetry_experiment(0.7, 0.10)
        summary["symmetry"] = {
            "positive": pos.classification,
            "negative": neg.classification,
            "mismatch": mismatch,
            "energies": [pos.energy, neg.energy],
        }
    except Exception as e:
        logger.exception("Demo symmetry run failed: %s", e)
        summary["symmetry"] = {"error": str(e)}

    # ------------- fiber map of the eigenfunction -------------
    try:
        g = GridGeometry(np.sqrt(2.0) * np.pi, 64)
        scan = DiagnosticsAgent(0.7, 0.02).phi_scan(eigenfunction(g), np.linspace(0.0, 3.0, 61))
        scan.to_csv(os.path.join(out_dir, "demo_phi_scan.csv"))
        summary["phi_scan"] = {"sign_change": scan.sign_change, "s_phi_bound": s_phi_bound(0.7, 0.02, g)}
    except Exception as e:
        logger.exception("Demo phi scan failed: %s", e)
        summary["phi_scan"] = {"error": str(e)}

    out_path = os.path.join(out_dir, "demo_summary.json")
    try:
        with open(out_path, "w", encoding="utf-8") as f:
            json.dump(json_safe(summary), f, indent=2)
        print(f"Demo complete. Summary written to {out_path}")
    except Exception as e:
        logger.exception("Failed to write demo output file: %s", e)
        print("Demo finished but failed to write demo output.")


if __name__ == "__main__":
    main()
