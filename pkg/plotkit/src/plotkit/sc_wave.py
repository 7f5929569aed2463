'''
Per-block decoding-wave heatmap from a coupled recursion trajectory CSV
(columns t, block, ..., ber). Rows must carry integer block ids and more
than one block; a plain (blockless) trajectory is rejected since there is
no wave to draw.

Standalone use:  plotkit-wave --in trajectory.csv --out fig.png
'''

import argparse
import csv

import matplotlib
matplotlib.use('Agg')
import matplotlib.colors as mcolors
import matplotlib.pyplot as plt
import numpy as np

from plotkit import style


def load_wave(csv_path):
    '''
    Read a trajectory CSV into (ber[block, t], t_values, block_ids).
    Missing (t, block) cells and empty ber fields become NaN.
    '''
    with open(csv_path, newline='') as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ('t', 'block', 'ber'):
            if col not in header:
                raise ValueError(f'{csv_path}: missing column {col!r}')
        rows = list(reader)
    if not rows:
        raise ValueError(f'{csv_path}: empty trajectory')
    blocks = sorted({r['block'] for r in rows})
    if any(not b.lstrip('-').isdigit() for b in blocks):
        raise ValueError('trajectory has no block structure '
                         f'(block ids {blocks}): not a coupled run')
    block_ids = sorted(int(b) for b in blocks)
    if len(block_ids) < 2:
        raise ValueError('single-block trajectory: no wave to draw')
    t_values = sorted({int(r['t']) for r in rows})
    t_pos = {t: j for j, t in enumerate(t_values)}
    c_pos = {c: j for j, c in enumerate(block_ids)}
    ber = np.full((len(block_ids), len(t_values)), np.nan)
    for r in rows:
        if r['ber'] != '':
            ber[c_pos[int(r['block'])], t_pos[int(r['t'])]] = float(r['ber'])
    return ber, t_values, block_ids


def plot_sc_wave(csv_path, out_image=None):
    '''
    Heatmap of per-block BER over iterations, log color scale. Exact zeros
    (fully decoded at the MC resolution) are painted with the lowest color.
    Returns the figure; writes out_image when given.
    '''
    ber, t_values, block_ids = load_wave(csv_path)
    pos = ber[np.isfinite(ber) & (ber > 0)]
    cmap = plt.get_cmap(style.WAVE_CMAP).copy()
    if pos.size:
        norm = mcolors.LogNorm(vmin=pos.min(), vmax=pos.max())
        cmap.set_under(cmap(0.0))
    else:
        norm = None
    fig, ax = plt.subplots(figsize=style.FIGSIZE)
    im = ax.imshow(ber, aspect='auto', origin='lower', interpolation='nearest',
                   cmap=cmap, norm=norm,
                   extent=(t_values[0] - 0.5, t_values[-1] + 0.5,
                           block_ids[0] - 0.5, block_ids[-1] + 0.5))
    ax.set_xlabel('iteration')
    ax.set_ylabel('block')
    ax.set_yticks(block_ids)
    fig.colorbar(im, ax=ax, label='BER')
    fig.tight_layout()
    if out_image is not None:
        fig.savefig(out_image, dpi=150)
    return fig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument('--in', dest='inputs', required=True, metavar='CSV',
                    help='trajectory csv from a coupled recursion run')
    ap.add_argument('--out', required=True, metavar='IMAGE',
                    help='output image path (png/svg/pdf)')
    args = ap.parse_args(argv)
    plot_sc_wave(args.inputs, args.out)
    print(f'wrote {args.out}')
    return 0


if __name__ == '__main__':
    raise SystemExit(main())
