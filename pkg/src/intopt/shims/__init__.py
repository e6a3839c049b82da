"""llvmlite-backed stand-ins for the ``opt`` and ``llc`` binaries.

These cover exactly the invocation subset the pipeline uses: module
verification, the -O3 pipeline, textual analysis printing for dominator
trees and loop info, and object-file emission.  Hosts with a real LLVM
install should prefer the real binaries (see ToolchainConfig).
"""
