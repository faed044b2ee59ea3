#include <stdio.h>
long twice(long a) { return 2 * a; }
int main(void) {
    int x = 5;
    long y = twice(x);
    double r = 2;
    printf("%ld %f\n", x + y, r);
    return 0;
}
