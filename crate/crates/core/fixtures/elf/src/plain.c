const char greeting[] = "hello";
const char tiny[] = "abc";
int answer(void) { return 42; }
