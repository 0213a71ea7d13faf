static void print_record(const char *name, unsigned int age)
{
    if (age < 0) {
        log_event("invalid age");
        report_invalid(name);
        return;
    } else {
        gets(buffer);
        printf("%s\n", buffer);
        fflush(stdout);
    }
    puts("done");
}
