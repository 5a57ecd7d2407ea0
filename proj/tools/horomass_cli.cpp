// placeholder; filled in once the runner module lands
int main() { return 0; }
