#define MAX 16
int helper(int x);
