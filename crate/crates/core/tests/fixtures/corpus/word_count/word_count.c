#include <stdio.h>
#include <ctype.h>

static long lines, words, chars;

void count(int c, int *in_word) {
    chars++;
    if (c == '\n') {
        lines++;
    }
    if (isspace(c)) {
        *in_word = 0;
    } else if (!*in_word) {
        *in_word = 1;
        words++;
    }
}

int main(void) {
    int c;
    int in_word = 0;
    while ((c = getchar()) != EOF) {
        count(c, &in_word);
    }
    printf("%ld %ld %ld\n", lines, words, chars);
    return 0;
}
