'''
Figure regeneration gate: rebuild the two-curve tradeoff figure and the
coupled-wave heatmap from the sweep CSVs produced by the main acceptance
run, and check that every plotted array equals the file contents exactly
(same float bits; parsing is the only transformation allowed).

Inputs come from <repo>/artifacts/ when present (a fresh acceptance run),
falling back to the committed copies under tests/data/.
'''

import csv
from pathlib import Path

import matplotlib.pyplot as plt
import numpy as np

from plotkit.sc_wave import plot_sc_wave
from plotkit.tradeoff import plot_tradeoff

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / 'figures'


def _input(name):
    live = HERE.parent.parent / 'artifacts' / name
    return live if live.exists() else HERE / 'data' / name


def _read(path):
    with open(path, newline='') as fh:
        return list(csv.DictReader(fh))


def test_c10_tradeoff_figure_matches_csv_exactly():
    src = _input('tradeoff.csv')
    OUT.mkdir(exist_ok=True)
    fig = plot_tradeoff(src, OUT / 'tradeoff.png')
    ax = fig.axes[0]

    # independent grouping of the file: (code, denoiser) per recursion row
    rows = [r for r in _read(src) if r['spectral_efficiency'] != '']
    expected = {}
    for r in rows:
        key = (r['code'], r['design'], r['denoiser'], r['bp_rounds'],
               r['post_bp'], r['method'])
        expected.setdefault(key, []).append(
            (float(r['ebn0_db']), float(r['spectral_efficiency'])))
    assert len(expected) == 2, 'tradeoff input should hold two curves'

    by_y = {}
    for key, pts in expected.items():
        pts.sort()
        by_y[tuple(y for _, y in pts)] = (key, [x for x, _ in pts])
    assert len(ax.lines) == 2
    seen = set()
    for line in ax.lines:
        ys = tuple(float(v) for v in line.get_ydata())
        assert ys in by_y, 'plotted y-array not found verbatim in the csv'
        key, xs = by_y[ys]
        assert np.array_equal(line.get_xdata(), xs), f'x mismatch for {key}'
        seen.add(key)
    assert len(seen) == 2

    # the coded curve must reach positive spectral efficiency earlier (in dB)
    def threshold(code):
        key = next(k for k in expected if k[0] == code)
        return min(x for x, y in expected[key] if y > 0)

    assert threshold('hamming74') < threshold('uncoded')
    assert (OUT / 'tradeoff.png').stat().st_size > 0
    plt.close(fig)


def test_c10_wave_heatmap_matches_csv_exactly():
    src = _input('sc_wave.csv')
    OUT.mkdir(exist_ok=True)
    fig = plot_sc_wave(src, OUT / 'sc_wave.png')
    im = fig.axes[0].images[0]
    plotted = np.asarray(im.get_array(), dtype=float)

    rows = _read(src)
    blocks = sorted({int(r['block']) for r in rows})
    ts = sorted({int(r['t']) for r in rows})
    expected = np.full((len(blocks), len(ts)), np.nan)
    for r in rows:
        expected[int(r['block']), int(r['t'])] = float(r['ber'])

    assert plotted.shape == expected.shape
    assert np.array_equal(plotted, expected, equal_nan=True), \
        'heatmap array differs from csv contents'
    assert (OUT / 'sc_wave.png').stat().st_size > 0
    plt.close(fig)
