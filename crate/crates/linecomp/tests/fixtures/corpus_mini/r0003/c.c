#include <stdio.h>
int util(void) {
    int counter;
    return 0;
}
