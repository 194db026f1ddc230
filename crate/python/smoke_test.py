"""Quick end-to-end check of the Python bindings.

Build and install first:

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import math

import softhand_py as sh

BALL = """
sim { t_end 2; stop equilibrium; }
object ball { circle 30; mass 0.1; pose 0 30.5 0; }
control {
  at 0 agonist 9.53;
  at 0 antagonist -9.53;
}
"""


def main():
    assert sh.FINGERS == ["thumb", "index", "middle", "pinkie"]

    # A straight finger reaches its full 145 mm length above its base.
    x, y = sh.fingertip("index", [0.0, 0.0, 0.0])
    assert abs(math.hypot(x + 75.0, y) - 145.0) < 1e-6, (x, y)

    # Moment arms are minus the derivative of path length.
    q, h = [0.4, 0.7, 0.3], 1e-6
    arms = sh.moment_arms("middle", "flexor", q)
    for j in range(3):
        qp, qm = list(q), list(q)
        qp[j] += h
        qm[j] -= h
        fd = -(sh.path_length("middle", "flexor", qp) - sh.path_length("middle", "flexor", qm)) / (2 * h)
        assert abs(arms[j] - fd) < 1e-5 * max(1.0, abs(fd)), (j, arms[j], fd)
    assert all(a > 0 for a in arms)
    assert all(a < 0 for a in sh.moment_arms("middle", "extensor", q))

    assert sh.clutch_transmit(0.07, 0.05) == (0.05, True)
    assert sh.clutch_transmit(0.03, 0.05) == (0.03, False)

    scene = sh.Scene.parse(BALL)
    assert scene.validate() == []
    assert sh.Scene.parse(scene.to_text()).to_text() == scene.to_text()
    try:
        sh.Scene.parse("object ball { circle 30; mass -1; }")
        raise AssertionError("negative mass accepted")
    except ValueError as e:
        assert "mass" in str(e)

    trace = scene.simulate()
    assert trace.equilibrium
    assert len(trace) == len(trace.times) == len(trace.q)
    quality = trace.grasp_quality(0)
    assert quality["stable"], quality
    stats = trace.stats()
    assert stats["max_clutch_torque"] <= 0.05 + 1e-12
    assert stats["max_motor_torque"] <= 0.40 + 1e-12
    assert trace.csv().startswith("t,q_thumb_mcp")
    assert trace.render().startswith("<svg")

    slack = sh.run_slack_demo([0.0, 20.0])
    assert slack["passed"], slack
    assert slack["scalars"]["delay_20mm"] >= slack["scalars"]["delay_0mm"]

    blocked = sh.run_blocked_finger("middle", 0.5)
    assert blocked["criteria"]["others_closed"], blocked

    print("softhand_py smoke test: ok")


if __name__ == "__main__":
    main()
