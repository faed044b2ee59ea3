#include <stdio.h>

enum Color { RED, GREEN, BLUE, COLOR_COUNT };

static int counts[COLOR_COUNT];

const char *color_name(enum Color c) {
    switch (c) {
    case RED:
        return "red";
    case GREEN:
        return "green";
    case BLUE:
        return "blue";
    default:
        return "unknown";
    }
}

enum Color parse_color(char ch) {
    if (ch == 'r') {
        return RED;
    }
    if (ch == 'g') {
        return GREEN;
    }
    return BLUE;
}

int main(void) {
    char word[16];
    while (scanf("%15s", word) == 1) {
        counts[parse_color(word[0])]++;
    }
    for (int i = 0; i < COLOR_COUNT; i++) {
        printf("%s: %d\n", color_name((enum Color)i), counts[i]);
    }
    return 0;
}
