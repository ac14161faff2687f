import math

from tzlasso.svgplot import interval_plot, length_boxplot


def test_interval_plot_deterministic_and_wellformed():
    rows = [
        {"name": "a", "method": "tz_v", "estimate": 0.5, "lower": 0.1, "upper": 0.9},
        {"name": "a", "method": "tz_m", "estimate": 0.5, "lower": -0.2, "upper": 1.4},
        {"name": "b", "method": "tz_v", "estimate": -0.3, "lower": -0.9, "upper": 0.2},
        {"name": "b", "method": "tz_m", "estimate": -0.3, "lower": -math.inf, "upper": 0.4},
    ]
    svg1 = interval_plot(rows)
    svg2 = interval_plot(rows)
    assert svg1 == svg2
    assert svg1.startswith("<svg ")
    assert svg1.rstrip().endswith("</svg>")
    assert svg1.count("<circle") == 4
    # the infinite lower end renders as an arrowhead, not a line to infinity
    assert "<path" in svg1
    assert "inf" not in svg1


def test_interval_plot_empty():
    svg = interval_plot([])
    assert "no selected variables" in svg


def test_length_boxplot_caps_infinite_lengths():
    lengths = {
        "tz_v": [0.4, 0.5, 0.6, 0.7, 0.5],
        "tz_m": [1.0, 1.2, math.inf, 1.4, math.inf],
    }
    svg = length_boxplot(lengths)
    assert svg == length_boxplot(lengths)
    assert "inf 40%" in svg
    assert "NaN" not in svg and "nan" not in svg
