void noop_handler(void)
{
    return;
}
