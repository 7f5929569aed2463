'''
Spectral-efficiency-vs-Eb/N0 figure from sweep CSVs. Recursion rows (method
'se') become lines; decoder rows (method 'amp') become hollow markers on the
same axes, so a recursion curve with matching decoder measurements reads as
a line with points on it.

Standalone use:  plotkit-tradeoff --in sweep.csv [--in more.csv] --out fig.png
'''

import argparse

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt

from plotkit import style
from plotkit.curves import load_curves


def plot_tradeoff(csv_paths, out_image=None):
    '''
    Draw one curve per group found in the CSVs. Returns the figure; also
    writes it to out_image when given. Plotted arrays are exactly the
    parsed CSV columns.
    '''
    curves = load_curves(csv_paths)
    fig, ax = plt.subplots(figsize=style.FIGSIZE)
    for i, c in enumerate(curves.lines):
        ax.plot(c.x, c.y, label=c.label, **style.line_kw(i))
    for i, c in enumerate(curves.points):
        ax.plot(c.x, c.y, label=c.label, **style.marker_kw(i))
    ax.set_xlabel(curves.xlabel)
    ax.set_ylabel(curves.ylabel)
    ax.grid(True, **style.GRID_KW)
    ax.legend(fontsize=8)
    fig.tight_layout()
    if out_image is not None:
        fig.savefig(out_image, dpi=150)
    return fig


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument('--in', dest='inputs', action='append', required=True,
                    metavar='CSV', help='sweep csv (repeatable)')
    ap.add_argument('--out', required=True, metavar='IMAGE',
                    help='output image path (png/svg/pdf)')
    args = ap.parse_args(argv)
    plot_tradeoff(args.inputs, args.out)
    print(f'wrote {args.out}')
    return 0


if __name__ == '__main__':
    raise SystemExit(main())
