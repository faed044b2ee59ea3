#include <stdio.h>

#define MAX_N 90

long long memo[MAX_N + 1];

long long fib(int n) {
    if (n < 2) {
        return n;
    }
    if (memo[n] != 0) {
        return memo[n];
    }
    memo[n] = fib(n - 1) + fib(n - 2);
    return memo[n];
}

int main(void) {
    int n;
    while (scanf("%d", &n) == 1) {
        if (n < 0 || n > MAX_N) {
            printf("out of range\n");
            continue;
        }
        printf("fib(%d) = %lld\n", n, fib(n));
    }
    return 0;
}
