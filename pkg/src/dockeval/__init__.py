"""dockeval: evaluation toolkit for protein-ligand docking predictions.

Modules:

* :mod:`dockeval.chemio` - SDF V2000 and PDB parsing/writing
* :mod:`dockeval.geom` - superposition, plane fitting, distances, radii
* :mod:`dockeval.ligrmsd` - symmetry-corrected ligand RMSD
* :mod:`dockeval.validity` - chemical, intramolecular and intermolecular checks
* :mod:`dockeval.crossdock` - C-alpha alignment and ligand transfer
* :mod:`dockeval.pocketsim` - pocket extraction and TM-score similarity
* :mod:`dockeval.relax` - restrained energy minimisation
* :mod:`dockeval.curate` - dataset selection pipelines
* :mod:`dockeval.metrics` - success rates, correlation, reports
"""
__version__ = "0.1.0"
