#include <stdio.h>
int main(void) {
    int count = 0;
    int counter;
    printf("%d!\n", count);
    puts("done");
    return count;
}
