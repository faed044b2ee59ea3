#include <stdio.h>
int g_max = 10;
enum color { RED, GREEN };
int main(void) {
    enum color c = GREEN;
    printf("%d %d\n", g_max, c == RED);
    return 0;
}
