'''
Fixed drawing conventions so every figure in a document looks the same:
recursion results are lines, decoder measurements are markers, the x axis
is Eb/N0 in dB on a linear scale.
'''

LINE_STYLES = ['-', '--', '-.', ':']
MARKERS = ['o', 's', '^', 'v', 'D', 'x']
COLORS = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b']

FIGSIZE = (6.4, 4.2)
GRID_KW = dict(alpha=0.3, linewidth=0.6)
XLABEL = 'Eb/N0 (dB)'
TRADEOFF_YLABEL = 'spectral efficiency (bits / channel use)'
WAVE_CMAP = 'viridis'


def line_kw(i):
    '''Line style for the i-th recursion curve.'''
    return dict(color=COLORS[i % len(COLORS)],
                linestyle=LINE_STYLES[(i // len(COLORS)) % len(LINE_STYLES)],
                linewidth=1.6)


def marker_kw(i):
    '''Marker style for the i-th measured-points group.'''
    return dict(color=COLORS[i % len(COLORS)],
                marker=MARKERS[i % len(MARKERS)],
                linestyle='none', markersize=5, markerfacecolor='none')
