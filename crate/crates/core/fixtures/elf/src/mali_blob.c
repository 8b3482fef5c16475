const char mali_version[] = "r32p1-01eac0";
const char mali_tag[] = "ARM Mali driver";
int mali_init(void) { return 32; }
