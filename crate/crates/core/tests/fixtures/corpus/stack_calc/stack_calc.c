#include <stdio.h>
#include <stdlib.h>

#define MAX_DEPTH 64

static long stack[MAX_DEPTH];
static int top = 0;

void push(long v) {
    if (top < MAX_DEPTH) {
        stack[top] = v;
        top++;
    }
}

long pop(void) {
    if (top == 0) {
        return 0;
    }
    top--;
    return stack[top];
}

int main(void) {
    char tok[32];
    while (scanf("%31s", tok) == 1) {
        if (tok[0] == '+' || tok[0] == '-' || tok[0] == '*') {
            long b = pop();
            long a = pop();
            if (tok[0] == '+') {
                push(a + b);
            } else if (tok[0] == '-') {
                push(a - b);
            } else {
                push(a * b);
            }
        } else if (tok[0] == '=') {
            printf("%ld\n", pop());
        } else {
            push(atol(tok));
        }
    }
    printf("depth %d\n", top);
    return 0;
}
