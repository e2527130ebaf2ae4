"""A commanded height step turning into a countermovement jump.

Runs the hopper jump configuration for one seed and narrates the phases the
planner discovers on its own: a crouch (the base dips below stance before
the scheduled step), an extension spike in the knee torque, a flight phase
with zero contact force, and a landing it absorbs without falling. There is
no reference trajectory anywhere - the schedule just moves the height
target 0.375 m up at t = 0.7 s and the sampler finds the rest.

Run:  python3 demos/hopper_jump.py [--seed N] [--plot out.png]
"""

from __future__ import annotations

import argparse

import numpy as np

from splinempc.env import make_env
from splinempc.harness import ExperimentConfig, run
from splinempc.planner import PlannerConfig

STEP_TIME = 0.7
RISE = 0.375


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--plot", metavar="PNG", help="also render a figure")
    args = parser.parse_args()

    stand = make_env("planar_hopper").spec.stand_height
    config = ExperimentConfig(
        env_name="planar_hopper",
        task="jumping",
        duration=2.0,
        seeds=(args.seed,),
        planner=PlannerConfig(samples=90, scale_q=0.7, scale_v=6.0),
        cost_overrides=dict(
            p_des_z=stand,
            height_schedule=((STEP_TIME, stand + RISE),),
        ),
    )
    log = run(config)[0]

    t = log.records["time"]
    z = log.records["base_z"]
    airborne = log.contact_matrix.max(axis=1) == 0.0
    apex = int(np.argmax(z))

    # the jump's flight phase = longest contiguous airborne run
    best_len, best_start, streak = 0, 0, 0
    for idx, off_ground in enumerate(airborne):
        streak = streak + 1 if off_ground else 0
        if streak > best_len:
            best_len, best_start = streak, idx - streak + 1

    print(f"seed {args.seed}: stance height {stand:.3f} m, commanded "
          f"{stand + RISE:.3f} m from t = {STEP_TIME} s")
    crouch = float(z[t < STEP_TIME].min())
    print(f"crouch:  base dips {stand - crouch:.3f} m below stance "
          f"before takeoff")
    if best_len:
        print(f"flight:  {best_len} consecutive control steps off the "
              f"ground from t = {t[best_start]:.2f} s")
    else:
        print("flight:  none - this seed never left the ground")
    print(f"apex:    {z[apex]:.3f} m at t = {t[apex]:.2f} s "
          f"({(z[apex] - stand) / RISE:.0%} of the commanded rise)")
    landed = "survived the landing" if log.summary["success"] else \
        f"fell at step {log.summary['fail_step']}"
    print(f"landing: {landed}")

    if args.plot:
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            print("matplotlib not installed; skipping the figure")
            return 0
        fig, (ax, rx) = plt.subplots(
            2, 1, figsize=(7, 5), sharex=True,
            gridspec_kw={"height_ratios": (3, 1)},
        )
        ax.plot(t, z, label="base height")
        ax.axhline(stand, color="gray", lw=0.8, ls="--", label="stance")
        ax.axhline(stand + RISE, color="green", lw=0.8, ls="--",
                   label="commanded")
        ax.axvline(STEP_TIME, color="black", lw=0.8, ls=":")
        ax.set_ylabel("height [m]")
        ax.legend(loc="upper left")
        rx.fill_between(t, 0, (~airborne).astype(float), step="mid",
                        color="tab:brown", alpha=0.6)
        rx.set_ylabel("contact")
        rx.set_yticks([])
        rx.set_xlabel("time [s]")
        fig.tight_layout()
        fig.savefig(args.plot, dpi=130)
        print(f"figure written to {args.plot}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
