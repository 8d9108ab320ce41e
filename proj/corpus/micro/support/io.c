/* Output helpers shared by the micro-corpus programs. */
#include "std_testcase.h"

void printLine(const char *line)
{
    if (line != NULL)
    {
        printf("%s\n", line);
    }
}

void printWLine(const wchar_t *line)
{
    if (line != NULL)
    {
        wprintf(L"%ls\n", line);
    }
}

void printIntLine(int intNumber)
{
    printf("%d\n", intNumber);
}

void printLongLine(long longNumber)
{
    printf("%ld\n", longNumber);
}

void printUnsignedLongLine(unsigned long unsignedLongNumber)
{
    printf("%lu\n", unsignedLongNumber);
}

void printSizeTLine(size_t sizeTNumber)
{
    printf("%zu\n", sizeTNumber);
}

void printDoubleLine(double doubleNumber)
{
    printf("%g\n", doubleNumber);
}
