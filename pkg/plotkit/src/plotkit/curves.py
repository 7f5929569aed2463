'''
Load sweep CSV files into grouped curves. One group = one drawable thing:
all rows sharing (code, design, denoiser, bp rounds, post-bp flag, method),
sorted by Eb/N0. Values are parsed, never recomputed or rescaled.
'''

import csv
from dataclasses import dataclass, field

import numpy as np

from plotkit import style

REQUIRED = ('code', 'design', 'denoiser', 'bp_rounds', 'post_bp',
            'mode', 'ebn0_db', 'spectral_efficiency', 'method', 'seed')


@dataclass
class Curve:
    label: str
    method: str               # 'se' draws a line, 'amp' draws markers
    x: np.ndarray = None      # Eb/N0 in dB, sorted ascending
    y: np.ndarray = None      # spectral efficiency
    rows: list = field(default_factory=list)


@dataclass
class CurveSet:
    groups: dict              # key tuple -> Curve, insertion-ordered
    xlabel: str = style.XLABEL
    ylabel: str = style.TRADEOFF_YLABEL

    @property
    def lines(self):
        return [c for c in self.groups.values() if c.method == 'se']

    @property
    def points(self):
        return [c for c in self.groups.values() if c.method != 'se']


def _read_rows(path):
    with open(path, newline='') as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED if c not in header]
        if missing:
            raise ValueError(f'{path}: missing columns {missing}')
        return list(reader)


def _label(key):
    code, design, denoiser, bp_rounds, post_bp, method = key
    name = denoiser + (bp_rounds if denoiser == 'bp' and bp_rounds else '')
    if post_bp not in ('', '0'):
        name += '+postbp'
    return f'{code} {design} {name} ({method})'


def load_curves(csv_paths):
    '''Parse one or more sweep CSVs into a CurveSet. Errors on empty input.'''
    if isinstance(csv_paths, (str, bytes)) or not hasattr(csv_paths, '__iter__'):
        csv_paths = [csv_paths]
    rows = []
    for path in csv_paths:
        rows.extend(_read_rows(path))
    usable = [r for r in rows if r['spectral_efficiency'] != '']
    if not usable:
        raise ValueError('no plottable rows (empty input or no '
                         'spectral_efficiency values)')
    groups = {}
    for r in usable:
        key = (r['code'], r['design'], r['denoiser'], r['bp_rounds'],
               r['post_bp'], r['method'])
        groups.setdefault(key, []).append(r)
    out = {}
    for key, grp in groups.items():
        grp.sort(key=lambda r: (float(r['ebn0_db']), str(r['seed'])))
        x = np.array([float(r['ebn0_db']) for r in grp])
        y = np.array([float(r['spectral_efficiency']) for r in grp])
        if key[-1] == 'se' and not np.all(np.diff(x) > 0):
            raise ValueError(f'group {key}: Eb/N0 not strictly increasing '
                             'after sort (duplicate grid points?)')
        out[key] = Curve(label=_label(key), method=key[-1], x=x, y=y, rows=grp)
    return CurveSet(groups=out)
