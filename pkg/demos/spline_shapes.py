"""What the three trajectory parameterizations do between identical nodes.

Builds one set of position nodes with deliberately hot velocities near the
joint bounds, renders the dual-space Hermite, node-fitted cubic, and
quadratic interpolants through them, and measures how far each strays
outside the bounds. The point of the dual-space form: clamping node
velocities gives a hard guarantee on the whole continuous curve, while the
fitted baselines manufacture their own velocities and overshoot.

Run:  python3 demos/spline_shapes.py [--plot out.png]
"""

from __future__ import annotations

import argparse

import numpy as np

from splinempc.splines import (
    JointBounds,
    SplineKind,
    clamp_velocities,
    dense_batch,
)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--plot", metavar="PNG", help="also render a figure")
    args = parser.parse_args()

    bounds = JointBounds(np.array([-1.0]), np.array([1.0]))
    node_times = np.linspace(0.0, 1.0, 5)
    positions = np.array([[0.2], [0.9], [-0.85], [0.7], [-0.3]])
    velocities = np.array([[4.0], [-9.0], [12.0], [-8.0], [5.0]])

    qc, vc = clamp_velocities(positions, velocities, bounds, 0.25)
    print("node positions: ", np.round(positions[:, 0], 3).tolist())
    print("raw velocities: ", np.round(velocities[:, 0], 3).tolist())
    print("clamped to:     ", np.round(vc[:, 0], 3).tolist())
    print()

    horizon, dt = 201, 0.005
    t = dt * np.arange(horizon)
    curves = {}
    print(f"{'kind':<10} {'min':>8} {'max':>8} {'beyond bounds':>14}")
    for kind in (SplineKind.HERMITE, SplineKind.CUBIC, SplineKind.QUADRATIC):
        pos, _ = dense_batch(kind, node_times, qc[None], vc[None], horizon, dt)
        curve = pos[0, :, 0]
        curves[kind] = curve
        over = float(np.maximum(np.maximum(curve - 1.0, -1.0 - curve), 0.0).max())
        print(f"{kind.value:<10} {curve.min():>8.3f} {curve.max():>8.3f} "
              f"{over:>14.4f}")
    print()
    print("hermite respects the clamp everywhere; the fitted baselines choose")
    print("their own internal velocities and carry the node-to-node swings")
    print("outside the feasible box.")

    if args.plot:
        try:
            import matplotlib
            matplotlib.use("Agg")
            import matplotlib.pyplot as plt
        except ImportError:
            print("matplotlib not installed; skipping the figure")
            return 0
        fig, ax = plt.subplots(figsize=(7, 4))
        for kind, curve in curves.items():
            ax.plot(t, curve, label=kind.value)
        ax.plot(node_times, qc[:, 0], "ko", label="nodes")
        for y in (-1.0, 1.0):
            ax.axhline(y, color="gray", lw=0.8, ls="--")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("joint position [rad]")
        ax.legend()
        fig.tight_layout()
        fig.savefig(args.plot, dpi=130)
        print(f"figure written to {args.plot}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
