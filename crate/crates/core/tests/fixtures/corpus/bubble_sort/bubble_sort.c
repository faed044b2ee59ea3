#include <stdio.h>

#define CAP 100

void swap(int *a, int *b) {
    int t = *a;
    *a = *b;
    *b = t;
}

void bubble_sort(int *v, int n) {
    for (int i = 0; i < n - 1; i++) {
        for (int j = 0; j < n - 1 - i; j++) {
            if (v[j] > v[j + 1]) {
                swap(&v[j], &v[j + 1]);
            }
        }
    }
}

int main(void) {
    int v[CAP];
    int n = 0;
    while (n < CAP && scanf("%d", &v[n]) == 1) {
        n++;
    }
    bubble_sort(v, n);
    for (int i = 0; i < n; i++) {
        printf(i ? " %d" : "%d", v[i]);
    }
    printf("\n");
    return 0;
}
