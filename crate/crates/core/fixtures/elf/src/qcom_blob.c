/* Stands in for a vendor GLES compiler blob. */
const char *qgl_version(void) { return "EV031.42.23.11"; }
const char qgl_banner[] = "Qualcomm Build: 12/03/20, I1a2b3c4d5e, Change: 2714539";
int qgl_compile(const char *src) { return src ? 0 : -1; }
