'''
Standalone figure scripts over the sweep harness CSV schema. Read-only:
every plotted array is taken from the file verbatim, nothing is recomputed.
'''

from plotkit.curves import CurveSet, load_curves
from plotkit.tradeoff import plot_tradeoff
from plotkit.sc_wave import load_wave, plot_sc_wave

__all__ = ['CurveSet', 'load_curves', 'plot_tradeoff', 'load_wave',
           'plot_sc_wave']
