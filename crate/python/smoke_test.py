"""Smoke test for the segway extension module."""
import math

import segway


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    p = segway.SegwayParams()
    c = p.constants()
    close(c["k1"], 0.3625, 1e-12)
    close(c["delta"], 0.030668, 1e-5)

    paper = segway.StateSpace.paper()
    poles = sorted(z.real for z in paper.stability()["poles"])
    close(poles[-1], 2.597, 1e-3)
    g1 = paper.transfer_functions()[0]
    assert g1["label"] == "G1"
    close(max(z.real for z in g1["zeros"]), 2.062, 1e-3)

    res = segway.place_poles(paper, kcanon=[9, 30, 38, 15])
    for got, want in zip(res["gains"], [-0.4839, -1.6129, -13.7056, -7.5347]):
        close(got, want, 1e-3)
    assert res["max_pole_error"] < 1e-6

    res = segway.place_poles(paper, poles=[-1, -2, complex(-1, 1), complex(-1, -1)])
    assert all(z.real < 0 for z in paper.closed_loop_poles(res["gains"]))

    derived = segway.StateSpace("derived", segway.SegwayParams(m=2.5))
    assert derived.stability()["unstable"]
    try:
        segway.place_poles(segway.StateSpace("derived", segway.SegwayParams(m=1e-12, K=0)), kcanon=[1, 2, 3, 4])
    except segway.UncontrollableError:
        pass
    else:
        raise AssertionError("expected UncontrollableError")

    run = segway.run_scenario(theta_i=math.pi / 12, t_hold=3.0)
    assert run["settled"]
    t_r, x_r, v_r = run["release"]
    close(run["x_target"], x_r + 3.2 * v_r, 1e-9)
    assert 8.0 <= run["settling_time"] <= 16.0
    assert run["mode"][0] == "hold" and run["mode"][-1] == "settled"

    ol = segway.run_open_loop(torque=1.0, model="nonlinear")
    assert ol["diverged"] and abs(ol["theta"][-1]) > math.pi / 2

    print("segway smoke test passed")


if __name__ == "__main__":
    main()
