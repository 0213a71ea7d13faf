int release_session(struct session *s)
{
    int id = s->id;
    free(s);
    log_close(s->name, id);
    return id;
}
