/* Passes a format string with a conversion but no matching argument. */
#include <stdarg.h>
#include "std_testcase.h"

/* Leaves a pointer to a readable string in the second argument register. */
__attribute__((noinline)) void stageRegister(int unused, const char *stale)
{
    __asm__ volatile("" : : "r"(unused), "r"(stale) : "memory");
}

__attribute__((noinline)) static void badVaSink(char *data, ...)
{
    va_list args;
    va_start(args, data);
    vfprintf(stdout, data, args);
    va_end(args);
}

static void badSink(char *data)
{
    stageRegister(0, "stale-register");
    badVaSink(data);
}

void CWE134_Uncontrolled_Format_String__char_console_vfprintf_44_bad(void)
{
    char dataBuffer[100] = "";
    char *data = dataBuffer;
    void (*funcPtr)(char *) = badSink;
    strcpy(data, "%s\n");
    funcPtr(data);
}

int main(void)
{
    printLine("Calling bad()...");
    CWE134_Uncontrolled_Format_String__char_console_vfprintf_44_bad();
    printLine("Finished bad()");
    return 0;
}
