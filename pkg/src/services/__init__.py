# Services Package
"""
Numerical services.

mesh_io, topology, stitching, builtin_surfaces and surgery build surfaces;
metric and fem turn them into eigenproblems; eigensolver, variation,
optimizer and certificates work on spectra; sweep and asymptotics run
parameter studies. Import the submodule you need.
"""
