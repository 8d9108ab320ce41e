/* Prints a wide string on a stream whose orientation was never set with fwide. */
#include "std_testcase.h"

void CWE126_Buffer_Overread__CWE170_wchar_t_loop_01_bad(void)
{
    wchar_t data[150];
    wchar_t dest[100];
    size_t i;
    wmemset(data, L'A', 100-1);
    data[100-1] = L'\0';
    for (i = 0; i < 99; i++)
    {
        dest[i] = data[i];
    }
    dest[99] = L'\0';
    printWLine(dest);
}

int main(void)
{
    printLine("Calling bad()...");
    CWE126_Buffer_Overread__CWE170_wchar_t_loop_01_bad();
    printLine("Finished bad()");
    return 0;
}
