/* Ignores ERANGE from strtoul and clamps the result to LONG_MAX. */
#include <limits.h>
#include "std_testcase.h"

void CWE391_Unchecked_Error_Condition__strtoul_01_bad(void)
{
    unsigned long ulNumber = strtoul("0xfffffffffffffffff", NULL, 0);
    if (ulNumber > (unsigned long)LONG_MAX)
    {
        ulNumber = (unsigned long)LONG_MAX;
    }
    printUnsignedLongLine(ulNumber);
}

int main(void)
{
    printLine("Calling bad()...");
    CWE391_Unchecked_Error_Condition__strtoul_01_bad();
    printLine("Finished bad()");
    return 0;
}
