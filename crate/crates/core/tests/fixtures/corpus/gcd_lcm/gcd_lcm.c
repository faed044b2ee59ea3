#include <stdio.h>

long gcd(long a, long b) {
    if (b == 0) {
        return a;
    }
    return gcd(b, a % b);
}

long lcm(long a, long b) {
    return a / gcd(a, b) * b;
}

int main(void) {
    long a, b;
    while (scanf("%ld %ld", &a, &b) == 2) {
        printf("gcd=%ld lcm=%ld\n", gcd(a, b), lcm(a, b));
    }
    return 0;
}
