const char *passes[] = { "gvn-hoist", "mergeicmps", "loop-unroll", "instcombine" };
const char llvm_id[] = "LLVM version 9.0.0";
int n_passes(void) { return sizeof passes / sizeof *passes; }
