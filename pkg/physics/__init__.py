# Physics package
from physics.lattice import LatticeSpec, Mode, ModeTable, Orientation, Site, enumerate_modes
from physics.rates import AtomSet, LambMatrix, RateMatrix
