void copy_host(char *hp)
{
    char buf[64];
    strcpy(buf, hp);
    use_host(buf);
}
