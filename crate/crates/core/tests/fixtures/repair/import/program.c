#include <stdio.h>
int main(void) {
    int counts[3] = {1, 2, 3};
    printf("%d\n", counts[0] + counts[1] + counts[2]);
    return 0;
}
