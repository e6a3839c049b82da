//===- GVN.cpp - Eliminate redundant values and loads ---------------------===//
//
// This pass performs global value numbering to eliminate fully redundant
// instructions. It also performs simple dead load elimination.
//
//===----------------------------------------------------------------------===//

#include "llvm/Transforms/Scalar/GVN.h"

using namespace llvm;

PreservedAnalyses GVN::run(Function &F, FunctionAnalysisManager &AM) {
  auto &AC = AM.getResult<AssumptionAnalysis>(F);
  auto &DT = AM.getResult<DominatorTreeAnalysis>(F);
  auto &TLI = AM.getResult<TargetLibraryAnalysis>(F);
  auto *MemDep = isMemDepEnabled()
                     ? &AM.getResult<MemoryDependenceAnalysis>(F)
                     : nullptr;
  auto *MSSA = AM.getCachedResult<MemorySSAAnalysis>(F);
  bool Changed = runImpl(F, AC, DT, TLI, MemDep, MSSA);
  if (!Changed)
    return PreservedAnalyses::all();
  PreservedAnalyses PA;
  PA.preserve<DominatorTreeAnalysis>();
  return PA;
}
