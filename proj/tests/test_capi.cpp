#include "typojack.h"
int main() { return 0; }
